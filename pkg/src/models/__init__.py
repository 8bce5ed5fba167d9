from src.models.errors import NullEventError, QuadratureError
from src.models.quantum import DensityOperator, DensityReport, HilbertSpace, Operator, Superoperator
from src.models.scheme import (
    BellSubset,
    EfficiencyTriple,
    RamanRateParams,
    SchemeId,
    SchemeParams1cw,
    SchemeParams1pls,
    SchemeParams2ph,
)
from src.models.unraveling import (
    ClickRecord,
    ConditionalState,
    DetectorPort,
    JumpChannel,
    MonteCarloResult,
    ProtocolModel,
    ScenarioProbabilities,
    SuperoperatorBundle,
)
from src.models.purification import BellDiagonalState, LocalRotation, PairSource, PurificationPlan, RegionPoint
from src.models.run import BenchmarkPreset, BenchmarkResult, CheckReport, PublishedValue, RegionSpec, RunManifest, SweepSpec

__all__ = [
    "NullEventError",
    "QuadratureError",
    "DensityOperator",
    "DensityReport",
    "HilbertSpace",
    "Operator",
    "Superoperator",
    "BellSubset",
    "EfficiencyTriple",
    "RamanRateParams",
    "SchemeId",
    "SchemeParams1cw",
    "SchemeParams1pls",
    "SchemeParams2ph",
    "ClickRecord",
    "ConditionalState",
    "DetectorPort",
    "JumpChannel",
    "MonteCarloResult",
    "ProtocolModel",
    "ScenarioProbabilities",
    "SuperoperatorBundle",
    "BellDiagonalState",
    "LocalRotation",
    "PairSource",
    "PurificationPlan",
    "RegionPoint",
    "BenchmarkPreset",
    "BenchmarkResult",
    "PublishedValue",
    "CheckReport",
    "RegionSpec",
    "RunManifest",
    "SweepSpec",
]
