"""Newton's second law for fields: geodesic k-fields, polysymplectic forms and forces."""

from .bundles import (
    BundleTangent,
    Covelocity,
    K2Velocity,
    KVelocity,
    interior_coupling,
    inverse_iso,
    liouville_eval,
    metric_iso,
    pairing,
    polysymplectic_eval,
)
from .dynamics import (
    SOPDE,
    EndValuedOneForm,
    ForceField,
    calT,
    calT_closed_form,
    custom_sopde,
    force_from_sopde,
    geodesic_oracle,
    geodesic_sopde,
    kinetic_differential,
    newton_identity_check,
    newton_sopde,
)
from .errors import (
    DegenerateMetricError,
    DimensionError,
    DomainError,
    FieldNewtonError,
    ParseError,
    StencilError,
    UnknownIdentifierError,
    ValidationError,
)
from .exprlang import evaluate, parse, pretty
from .geometry import Chart, MetricField, christoffel, from_catalog, hyperbolic2, k_kinetic_energy, minkowski, product, sphere2
from .geometry import flat as flat_metric
from .jets import TensorJet, TruncatedPolynomial, iterated_prolong, mu_embed, prolong1, prolong2
from .solve import Sheet, compatibility_defect, emit_sheet, exp_map, flat_newton_sheet, newton_residual, rank1_sheet, read_sheet
from .variational import (
    Potential,
    ProlongedVector,
    ddw_residual,
    hamilton_noether_check,
    hamilton_principle_defect,
    hamiltonian,
    lagrangian,
    newton_vs_ddw_report,
    noether_divergence,
    symmetry_defect,
)

__version__ = "0.1.0"

__all__ = [
    "BundleTangent",
    "Covelocity",
    "K2Velocity",
    "KVelocity",
    "interior_coupling",
    "inverse_iso",
    "liouville_eval",
    "metric_iso",
    "pairing",
    "polysymplectic_eval",
    "SOPDE",
    "EndValuedOneForm",
    "ForceField",
    "calT",
    "calT_closed_form",
    "custom_sopde",
    "force_from_sopde",
    "geodesic_oracle",
    "geodesic_sopde",
    "kinetic_differential",
    "newton_identity_check",
    "newton_sopde",
    "DegenerateMetricError",
    "DimensionError",
    "DomainError",
    "FieldNewtonError",
    "ParseError",
    "StencilError",
    "UnknownIdentifierError",
    "ValidationError",
    "evaluate",
    "parse",
    "pretty",
    "Chart",
    "MetricField",
    "christoffel",
    "from_catalog",
    "hyperbolic2",
    "k_kinetic_energy",
    "minkowski",
    "product",
    "sphere2",
    "flat_metric",
    "TensorJet",
    "TruncatedPolynomial",
    "iterated_prolong",
    "mu_embed",
    "prolong1",
    "prolong2",
    "Sheet",
    "compatibility_defect",
    "emit_sheet",
    "exp_map",
    "flat_newton_sheet",
    "newton_residual",
    "rank1_sheet",
    "read_sheet",
    "Potential",
    "ProlongedVector",
    "ddw_residual",
    "hamilton_noether_check",
    "hamilton_principle_defect",
    "hamiltonian",
    "lagrangian",
    "newton_vs_ddw_report",
    "noether_divergence",
    "symmetry_defect",
    "__version__",
]
