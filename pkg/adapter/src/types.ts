/** Wire types for the episode API; mirrors the server's JSON bodies. */

export type Space = "low" | "pano";

export interface FovDoc {
  vfov_deg: number;
  image_width: number;
  image_height: number;
}

export interface ViewDescriptorDoc {
  kind: "egocentric" | "panoramic" | "candidate";
  node: string;
  heading_deg: number;
  fov: FovDoc;
  image_ref: string | null;
}

export type PromptSegmentDoc =
  | { type: "text"; value: string }
  | { type: "image"; value: ViewDescriptorDoc };

export interface PromptDoc {
  schema_version: string;
  system: string;
  segments: PromptSegmentDoc[];
  vocabulary: string[];
}

export interface VariantBody {
  vfov_deg?: number;
  auto_adjust?: boolean;
  max_steps?: number | null;
}

export interface OpenEpisodeResponse {
  episode_token: string;
  system_prompt: string;
  prompt: PromptDoc;
  step: number;
}

export interface EpisodeSummary {
  pl_m: number;
  ne_m: number;
  oracle_success: boolean;
  success: boolean;
  spl: number;
  cls: number;
  stopped: boolean;
  num_decisions: number;
  final_node: string;
  record: Record<string, unknown>;
}

export interface StepResponse {
  done: boolean;
  prompt?: PromptDoc | null;
  step?: number | null;
  summary?: EpisodeSummary | null;
}

export interface EpisodeListing {
  episode_id: string;
  instruction_index: number;
  gt_path_length: number;
}

export interface SplitListing {
  split: string;
  episodes: EpisodeListing[];
}
