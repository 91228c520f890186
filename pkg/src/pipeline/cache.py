"""TTL caches for elaborated netlists and enumerated leakage paths."""

import hashlib
import json
import logging

from cachetools import TTLCache

from src.config.settings import settings

logger = logging.getLogger(__name__)

netlist_cache: TTLCache = TTLCache(maxsize=32, ttl=settings.netlist_cache_ttl)
path_cache: TTLCache = TTLCache(maxsize=128, ttl=settings.netlist_cache_ttl)


def make_key(*parts: str) -> str:
    return hashlib.sha256("\0".join(parts).encode()).hexdigest()


def _make_path_key(netlist_key: str, labels: dict, limits: dict) -> str:
    """Labels and limits are part of the key."""
    return make_key(netlist_key, json.dumps(labels, sort_keys=True), json.dumps(limits, sort_keys=True))


def get_cached_netlist(key: str):
    result = netlist_cache.get(key)
    if result is not None:
        logger.debug("Netlist cache hit: %s", key[:12])
    return result


def set_cached_netlist(key: str, netlist) -> None:
    netlist_cache[key] = netlist


def get_cached_paths(netlist_key: str, labels: dict, limits: dict):
    result = path_cache.get(_make_path_key(netlist_key, labels, limits))
    if result is not None:
        logger.debug("Path cache hit for netlist %s", netlist_key[:12])
    return result


def set_cached_paths(netlist_key: str, labels: dict, limits: dict, paths) -> None:
    path_cache[_make_path_key(netlist_key, labels, limits)] = paths


def clear_all_caches() -> None:
    netlist_cache.clear()
    path_cache.clear()
    logger.info("All caches cleared")
