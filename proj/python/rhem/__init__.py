"""Relational hyperevent models."""

from ._core import (
    AttributeTable,
    EventStream,
    RhemError,
    covariate_names,
    fit,
    loglik,
    observed_covariates,
    parse_events,
    read_attributes,
    read_events,
    run_cli,
    sample,
    simulate,
    stream_stats,
)

__all__ = [
    "AttributeTable",
    "EventStream",
    "RhemError",
    "covariate_names",
    "fit",
    "loglik",
    "observed_covariates",
    "parse_events",
    "read_attributes",
    "read_events",
    "run_cli",
    "sample",
    "simulate",
    "stream_stats",
]
