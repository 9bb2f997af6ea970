"""Run configuration files: endpoint rosters and system-under-test wiring.

One JSON file describes everything a run needs:

{
  "endpoints": [{"name": "...", "base_url": "...", "model_id": "...", ...}],
  "embedders": [{"name": "...", "base_url": "mock://hash?dim=64", ...}],
  "systems":  [{"name": "...", "endpoint": "...",
                "rag": {"index": "path.idx", "embedder": "...",
                        "top_k": 20, "rerank": {"provider": "lexical", "keep": 5}}}]
}
"""

from __future__ import annotations

import json
from pathlib import Path

from .evaluation import SystemUnderTest
from .providers import EmbeddingEndpoint, ModelEndpoint, get_chat_client, get_embedder
from .rag import RerankSpec, RetrievalConfig, VectorStore


def load_config(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def endpoint_map(config: dict) -> dict[str, ModelEndpoint]:
    out = {}
    for entry in config.get("endpoints", []):
        ep = ModelEndpoint(**entry)
        if ep.name in out:
            raise ValueError(f"duplicate endpoint name {ep.name!r}")
        out[ep.name] = ep
    return out


def embedder_map(config: dict) -> dict[str, EmbeddingEndpoint]:
    out = {}
    for entry in config.get("embedders", []):
        ep = EmbeddingEndpoint(**entry)
        if ep.name in out:
            raise ValueError(f"duplicate embedder name {ep.name!r}")
        out[ep.name] = ep
    return out


def get_endpoint(config: dict, name: str) -> ModelEndpoint:
    endpoints = endpoint_map(config)
    if name not in endpoints:
        raise KeyError(f"endpoint {name!r} not in roster (have {sorted(endpoints)})")
    return endpoints[name]


def get_embedder_endpoint(config: dict, name: str) -> EmbeddingEndpoint:
    embedders = embedder_map(config)
    if name not in embedders:
        raise KeyError(f"embedder {name!r} not in roster (have {sorted(embedders)})")
    return embedders[name]


def build_systems(config: dict, base_dir: str | Path = ".") -> list[SystemUnderTest]:
    """Instantiate every system in the config, loading RAG indexes from disk."""
    base = Path(base_dir)
    endpoints = endpoint_map(config)
    embedders = embedder_map(config)
    systems = []
    seen = set()
    for entry in config.get("systems", []):
        name = entry["name"]
        if name in seen:
            raise ValueError(f"duplicate system name {name!r}")
        seen.add(name)
        endpoint = endpoints[entry["endpoint"]]
        client = get_chat_client(endpoint)
        rag_entry = entry.get("rag")
        if rag_entry is None:
            systems.append(SystemUnderTest(name=name, client=client))
            continue
        index_path = Path(rag_entry["index"])
        if not index_path.is_absolute():
            index_path = base / index_path
        store = VectorStore.load(index_path)
        rerank_entry = rag_entry.get("rerank")
        cfg = RetrievalConfig(
            name=rag_entry.get("config_name", f"{name}-rag"),
            embedding=rag_entry["embedder"],
            top_k=rag_entry.get("top_k", 20),
            rerank=RerankSpec(**rerank_entry) if rerank_entry else None,
        )
        embedder = get_embedder(embedders[rag_entry["embedder"]])
        systems.append(SystemUnderTest(
            name=name, client=client, rag_store=store, rag_config=cfg, rag_embedder=embedder,
        ))
    return systems
