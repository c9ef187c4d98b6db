"""証明書・厳密探索・渦・吸収器・発見的パイプライン・検証実験。"""

from .absorber import AbsorberEntry, AbsorberState, absorb_leftover, prepare_absorber
from .bench import KINDS, gl_instance, ringel_instances, run_bench
from .certificate import (
    PackingCertificate,
    VerificationResult,
    certificate_dot,
    coverage,
    load_certificate,
    verify_certificate,
)
from .exact import ExactOutcome, pack_exact
from .heuristic import HeuristicConfig, HeuristicOutcome, pack_heuristic
from .vortex import Vortex, build_vortex, vortex_sizes

__all__ = [
    "AbsorberEntry",
    "AbsorberState",
    "ExactOutcome",
    "HeuristicConfig",
    "HeuristicOutcome",
    "KINDS",
    "PackingCertificate",
    "VerificationResult",
    "Vortex",
    "absorb_leftover",
    "build_vortex",
    "certificate_dot",
    "coverage",
    "gl_instance",
    "load_certificate",
    "pack_exact",
    "pack_heuristic",
    "prepare_absorber",
    "ringel_instances",
    "run_bench",
    "verify_certificate",
    "vortex_sizes",
]
