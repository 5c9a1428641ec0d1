"""Generate the FFLD fields referenced by data/scenarios/dislocation_from_files.yaml.

Run from the repository root:  python data/generate_fixture_fields.py
"""
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from frontflow.solvers.artifacts import write_field  # noqa: E402
from frontflow.solvers.grid import ScalarField, build_grid  # noqa: E402
from frontflow.solvers.velocity import mexican_hat_kernel  # noqa: E402

SEED = 42
GRID = dict(dim=2, half_extent=1.0, points_per_axis=101, t_final=0.2, dt=0.02)


def main(output_dir=Path(__file__).resolve().parent / 'fields', seed=SEED):
    output_dir = Path(output_dir)
    rng = np.random.default_rng(seed)
    grid = build_grid(**GRID)

    kernel = mexican_hat_kernel(grid, sigma=0.1, a1=2.0, a2=1.0)
    write_field(output_dir / 'mexican_hat_kernel.ffld', kernel)

    # Occupancy: the disc of radius 0.3 plus a sprinkling of occupied nodes outside it
    noise = rng.random(grid.shape) < 0.05
    chi = ScalarField(grid, ((grid.radius <= 0.3) | noise).astype(float))
    write_field(output_dir / 'random_chi.ffld', chi)

    print(f"Fields written to {output_dir}")
    print(f"Kernel patch: {kernel.grid.points_per_axis} nodes per axis, spacing {kernel.grid.spacing:.4g}")
    print(f"Occupied nodes: {int(chi.values.sum())} of {grid.node_count}")
    return output_dir


if __name__ == '__main__':
    main()
