"""Dataset registry: maps split names to loadable episode collections.

A registry entry is either a serialized synthetic world file or an
R2R-style root directory (split JSON files plus a connectivity/ subdir).
Episode specs are materialized on demand with the action space and variant
the client asked for.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Union

from ..data import (
    ConnectivityCache,
    DataError,
    R2R_SPLITS,
    load_r2r,
    load_world,
)
from ..simulator import EpisodeSpec, VariantConfig


@dataclass
class _WorldSource:
    path: Path


@dataclass
class _R2RSource:
    split_file: Path
    connectivity_root: Path


class DatasetRegistry:
    def __init__(self):
        self._sources: dict[str, object] = {}
        self._world_cache: dict[str, list[EpisodeSpec]] = {}
        self._conn_caches: dict[Path, ConnectivityCache] = {}

    def add_dataset(self, path: Union[str, Path], connectivity_root: Optional[Path] = None):
        """Register a synthetic world file or an R2R root directory."""
        p = Path(path)
        if p.is_file():
            _graph, _eps, split = load_world(p)
            self._sources[split] = _WorldSource(path=p)
            return
        if p.is_dir():
            conn = Path(connectivity_root) if connectivity_root else p / "connectivity"
            found = False
            for split in R2R_SPLITS:
                split_file = p / f"R2R_{split}.json"
                if split_file.exists():
                    self._sources[split] = _R2RSource(split_file, conn)
                    found = True
            if not found:
                raise DataError(f"no R2R_<split>.json files under {p}")
            return
        raise DataError(f"dataset path {p} does not exist")

    def splits(self) -> list[str]:
        return sorted(self._sources)

    def has_split(self, split: str) -> bool:
        return split in self._sources

    def episodes(
        self,
        split: str,
        space: str = "pano",
        variant: Optional[VariantConfig] = None,
        instruction_index: Optional[int] = None,
    ) -> list[EpisodeSpec]:
        source = self._sources.get(split)
        if source is None:
            raise DataError(f"unknown split {split!r}; have {self.splits()}")
        if isinstance(source, _WorldSource):
            key = str(source.path)
            if key not in self._world_cache:
                _graph, eps, _split = load_world(source.path)
                self._world_cache[key] = eps
            eps = self._world_cache[key]
            variant = variant or VariantConfig()
            out = [replace(e, space=space, variant=variant) for e in eps]
            if instruction_index is not None:
                out = [e for e in out if e.instruction_index == instruction_index]
            return out
        cache = self._conn_caches.setdefault(
            source.connectivity_root, ConnectivityCache(source.connectivity_root)
        )
        return load_r2r(
            source.split_file,
            source.connectivity_root,
            space=space,
            variant=variant,
            instruction_index=instruction_index,
            cache=cache,
        )

    def episode(
        self,
        split: str,
        episode_id: str,
        instruction_index: int,
        space: str,
        variant: VariantConfig,
    ) -> EpisodeSpec:
        for spec in self.episodes(split, space=space, variant=variant):
            if spec.episode_id == episode_id and spec.instruction_index == instruction_index:
                return spec
        raise DataError(
            f"episode {episode_id!r} (instruction {instruction_index})"
            f" not found in split {split!r}"
        )
