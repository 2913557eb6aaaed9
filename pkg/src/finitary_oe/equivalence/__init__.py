"""Orbit equivalence machinery: skew maps, uniform relations, the diagram and its verifier."""

from finitary_oe.equivalence.maps import (
    CopyResult,
    ExhaustionStalled,
    MatchResult,
    UniformRelation,
    WitnessNotFound,
    Projection,
    agree_set,
    stable_set,
    copy_structure_eps,
    copy_structure_lambda,
    equimeasure_map_mp,
    match_tuples,
    tuple_exhaustion,
    natural_extension,
    refine_uniform,
    skew_map_eps,
    skew_map_lambda,
    TupleResult,
)
from finitary_oe.equivalence.diagram import DiagramError, FinitaryOE, TypeMismatch, build_diagram
from finitary_oe.equivalence.verify import VerificationReport, inject_fault, verify_file, verify_oe

