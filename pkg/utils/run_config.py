# SPDX-License-Identifier: MIT

import logging
import math
import os
from dataclasses import dataclass
from typing import Optional

from utils.errors import ConformalMapError
from utils.mesh_handler import normalize_area, read_mesh, validate_genus_zero

LOG_ENV = "SPHERECONF_LOG"
DEFAULT_LOG_LEVEL = "WARNING"

ALGORITHMS = ("dem", "mdem")
DEFAULT_RHO = {"dem": 1.1, "mdem": 1.4}
DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 1000
DEFAULT_BURN_IN = 20
AREA_TARGETS = {"one": 1.0, "4pi": 4.0 * math.pi, "none": None}


@dataclass
class RunConfig:
    input_path: str
    output_path: Optional[str] = None
    algorithm: str = "mdem"
    rho: Optional[float] = None
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    report_path: Optional[str] = None
    history_path: Optional[str] = None
    area_normalization: str = "one"
    dump_laplacian: Optional[str] = None
    deflate: bool = True
    include_timing: bool = False
    burn_in: int = DEFAULT_BURN_IN
    workers: int = 1
    with_dem: bool = False

    def __post_init__(self):
        if self.rho is None and self.algorithm in DEFAULT_RHO:
            self.rho = DEFAULT_RHO[self.algorithm]

    @classmethod
    def from_args(cls, args):
        """Build from an argparse namespace; flags a script does not define keep their defaults."""
        names = cls.__dataclass_fields__
        values = {name: getattr(args, name) for name in names if getattr(args, name, None) is not None}
        return cls(**values).validate()

    def validate(self):
        if self.algorithm not in ALGORITHMS:
            raise ConformalMapError("cli", "algorithm", f"unknown algorithm {self.algorithm!r}")
        if not self.rho > 1:
            raise ConformalMapError("cli", "rho", f"--rho must be greater than 1, got {self.rho}")
        if not self.tol > 0:
            raise ConformalMapError("cli", "tol", f"--tol must be positive, got {self.tol}")
        if self.max_iter < 0:
            raise ConformalMapError("cli", "max-iter", f"--max-iter must be nonnegative, got {self.max_iter}")
        if self.area_normalization not in AREA_TARGETS:
            raise ConformalMapError("cli", "area", f"unknown area normalization {self.area_normalization!r}")
        if self.workers < 1:
            raise ConformalMapError("cli", "workers", f"--workers must be at least 1, got {self.workers}")
        if self.burn_in < 0:
            raise ConformalMapError("cli", "burn-in", f"--burn-in must be nonnegative, got {self.burn_in}")
        return self


def add_solver_arguments(parser, algo=True, iterations=True):
    if algo:
        parser.add_argument("--algo", dest="algorithm", choices=ALGORITHMS, default="mdem", help="Solver to run.")
    parser.add_argument("--rho", type=float, default=None, help="Partition radius (default 1.4 for mdem, 1.1 for dem).")
    if iterations:
        parser.add_argument("--tol", type=float, default=DEFAULT_TOL, help="Convergence tolerance.")
        parser.add_argument("--max-iter", dest="max_iter", type=int, default=DEFAULT_MAX_ITER, help="Iteration cap.")
    parser.add_argument(
        "--area", dest="area_normalization", choices=tuple(AREA_TARGETS), default="one",
        help="Normalize the surface area before solving.",
    )


def configure_logging():
    level = os.environ.get(LOG_ENV, DEFAULT_LOG_LEVEL).upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def prepare_mesh(path, area_normalization="one"):
    """Read, validate and area-normalize the input mesh."""
    mesh = read_mesh(path)
    validate_genus_zero(mesh)
    target = AREA_TARGETS[area_normalization]
    if target is not None:
        mesh = normalize_area(mesh, target)
    return mesh
