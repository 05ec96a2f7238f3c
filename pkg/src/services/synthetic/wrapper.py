"""
Wrapper executable for synthetic surfaces, speaking the standard target protocol:

    python -m src.services.synthetic.wrapper <instance> <surface.json> <cutoff> <runlength> <seed> -name value ...

It sleeps for the surface runtime (scaled by CSSC_SYNTHETIC_TIME_SCALE) and prints
"Result for configurator: <STATUS>, <runtime>, -1, -1, <seed>".
"""
import math
import os
import sys
import time

from src.services.synthetic.surfaces import load_surface, true_runtime


def _coerce(token: str):
    for cast in (int, float):
        try:
            return cast(token)
        except ValueError:
            pass
    return token


def parse_args(argv: list[str]) -> tuple[str, str, float, int, dict]:
    if len(argv) < 5 or (len(argv) - 5) % 2:
        raise SystemExit("usage: wrapper <instance> <surface.json> <cutoff> <runlength> <seed> [-name value]...")
    instance, surface_path, cutoff, _runlength, seed = argv[:5]
    params = {}
    for flag, value in zip(argv[5::2], argv[6::2]):
        params[flag.lstrip("-")] = _coerce(value)
    return instance, surface_path, float(cutoff), int(seed), params


def main(argv: list[str] | None = None) -> int:
    instance, surface_path, cutoff, seed, params = parse_args(sys.argv[1:] if argv is None else argv)
    surface = load_surface(surface_path)
    time_scale = float(os.getenv("CSSC_SYNTHETIC_TIME_SCALE", "1.0"))

    runtime = true_runtime(surface, params, instance, seed)
    if runtime is None:
        time.sleep(min(surface.base_runtime, cutoff) * time_scale)
        print(f"Result for configurator: CRASHED, {min(surface.base_runtime, cutoff)}, -1, -1, {seed}")
        return 0
    if runtime > cutoff:
        # Run past the cutoff and let the runner enforce it, like a real solver would.
        time.sleep(min(runtime, cutoff + 60) * time_scale if math.isfinite(runtime) else cutoff + 60)
        print(f"Result for configurator: TIMEOUT, {cutoff}, -1, -1, {seed}")
        return 0
    time.sleep(runtime * time_scale)
    print(f"Result for configurator: SUCCESS, {runtime}, -1, -1, {seed}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
