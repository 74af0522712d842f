import os
import sys

_threads = os.environ.get("MASSREN_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)


def main() -> int:
    from .cli import main as _main
    return _main()


if __name__ == "__main__":
    sys.exit(main())
