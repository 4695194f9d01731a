export { EpisodeApiClient, ApiError } from "./client.js";
export { parseAction, ActionParseError } from "./parse.js";
export {
  decodePpm,
  encodePpm,
  makeImage,
  resizeHalf,
  stitchPanorama,
  type RawImage,
} from "./images.js";
export {
  alwaysStopModel,
  chatEndpointModel,
  describeView,
  expertEchoModel,
  fakeModel,
  randomModel,
  toChatMessages,
  type FakeModelName,
  type Model,
} from "./model.js";
export {
  meanPathLength,
  runAgent,
  runEpisode,
  successRate,
  type EpisodeResult,
  type RunOptions,
} from "./agent.js";
export * from "./types.js";
