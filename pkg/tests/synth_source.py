"""Write a synthetic QMF1 stream to stdout: ``python synth_source.py N M P [seed]``."""
import sys

import numpy as np

from streamqm.qmf import write_block


def main():
    N, M, P = (int(a) for a in sys.argv[1:4])
    seed = int(sys.argv[4]) if len(sys.argv) > 4 else 0
    rng = np.random.default_rng(seed)
    out = sys.stdout.buffer
    sent = 0
    while sent < M:
        p = min(P, M - sent)
        write_block(out, rng.standard_normal((N, p)))
        sent += p
    out.flush()


if __name__ == "__main__":
    main()
