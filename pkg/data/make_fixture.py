"""Regenerate the synthetic 47-sample expression fixture.

Mean: common level 2 plus N(0, 0.5^2) gene effects. Noise: diagonal sigma1
(variances 1, 3, 10). Writes synthetic_47x200.csv and its true mean.
"""

from pathlib import Path

import numpy as np

from meanshrink.model import build_covariance, make_instance, generate_sample

N, P, SEED = 47, 200, 20240601


def main(out_dir=Path(__file__).parent):
    rng = np.random.default_rng(SEED)
    mu = 2.0 + 0.5 * rng.standard_normal(P)
    inst = make_instance(mu, build_covariance("sigma1", P), N)
    X = generate_sample(inst, rng)
    genes = [f"g{j + 1:03d}" for j in range(P)]
    with open(out_dir / "synthetic_47x200.csv", "w", encoding="utf-8") as fh:
        fh.write("sample," + ",".join(genes) + "\n")
        for i, row in enumerate(X):
            fh.write(f"s{i + 1:02d}," + ",".join(repr(float(v)) for v in row) + "\n")
    with open(out_dir / "synthetic_47x200_mu.csv", "w", encoding="utf-8") as fh:
        fh.write("\n".join(repr(float(v)) for v in mu) + "\n")


if __name__ == "__main__":
    main()
