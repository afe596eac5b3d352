from graphdiff._core import (
    GraphdiffError,
    SmilesSyntaxError,
    __version__,
    atom_count,
    canonical_smiles,
    cosine_schedule,
    descriptors,
    guidance_combine,
    is_valid,
    ring_count,
    run_cli,
    sample,
    tanimoto,
    toy_dataset,
)

__all__ = [
    "GraphdiffError",
    "SmilesSyntaxError",
    "__version__",
    "atom_count",
    "canonical_smiles",
    "cosine_schedule",
    "descriptors",
    "guidance_combine",
    "is_valid",
    "ring_count",
    "run_cli",
    "sample",
    "tanimoto",
    "toy_dataset",
]
