"""Pydantic request/response models for the episode API."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class VariantBody(BaseModel):
    vfov_deg: float = 105.0
    auto_adjust: bool = True
    max_steps: Optional[int] = None


class OpenEpisodeRequest(BaseModel):
    split: str
    episode_id: str
    instruction_index: int = 0
    space: Literal["low", "pano"] = "pano"
    variant: VariantBody = Field(default_factory=VariantBody)


class OpenEpisodeResponse(BaseModel):
    episode_token: str
    system_prompt: str
    prompt: dict
    step: int


class ActionRequest(BaseModel):
    token: str


class StepResponse(BaseModel):
    done: bool
    prompt: Optional[dict] = None
    step: Optional[int] = None
    summary: Optional[dict] = None


class SnapshotResponse(BaseModel):
    episode_id: str
    instruction_index: int
    split: str
    space: str
    node: str
    heading_deg: float
    distance_m: float
    step: int
    done: bool


class ExpertActionResponse(BaseModel):
    token: str


class EpisodeListing(BaseModel):
    episode_id: str
    instruction_index: int
    gt_path_length: int


class SplitListing(BaseModel):
    split: str
    episodes: list[EpisodeListing]


class ErrorBody(BaseModel):
    error: str
    raw: Optional[str] = None
