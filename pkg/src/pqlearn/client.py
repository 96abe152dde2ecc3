"""Thin HTTP client for the experiment service.

By default the client mounts the service in-process through an ASGI
transport, so no server needs to be running and results are identical to
a networked deployment; pass a base URL to talk to a remote instance.
"""
from __future__ import annotations

from typing import Any

import httpx


class ServiceError(RuntimeError):
    """Non-2xx response from the service, with its detail message."""


class ServiceClient:
    def __init__(self, server: str | None = None, timeout: float = 3600.0):
        if server is None:
            # Sync in-process ASGI client (httpx's own ASGI transport is
            # async-only); behavior matches a networked deployment. The
            # import is noisy about httpx versions, which doesn't apply here.
            import warnings

            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                from starlette.testclient import TestClient

            from .service.app import create_app

            self._client = TestClient(create_app())
        else:
            self._client = httpx.Client(base_url=server, timeout=timeout)

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> "ServiceClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _post(self, path: str, payload: dict) -> dict:
        response = self._client.post(path, json=payload)
        if response.status_code != 200:
            try:
                detail = response.json().get("detail", response.text)
            except ValueError:
                detail = response.text
            raise ServiceError(f"{path} failed ({response.status_code}): {detail}")
        return response.json()

    def health(self) -> dict:
        response = self._client.get("/health")
        response.raise_for_status()
        return response.json()

    def bounds(self, payload: dict) -> dict:
        return self._post("/bounds", payload)

    def validate(self, mdp_doc: dict) -> dict:
        return self._post("/validate", mdp_doc)

    def run(
        self,
        config: dict,
        seeds: int | None = None,
        threads: int = 1,
    ) -> dict:
        body: dict[str, Any] = {"config": config, "threads": threads}
        if seeds is not None:
            body["seeds"] = seeds
        return self._post("/run", body)

    def compare(
        self,
        pq_config: dict,
        standard_config: dict,
        matched_budget: int,
        threads: int = 1,
    ) -> dict:
        return self._post(
            "/compare",
            {
                "pq": pq_config,
                "standard": standard_config,
                "matched_budget": matched_budget,
                "threads": threads,
            },
        )
