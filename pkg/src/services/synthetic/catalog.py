import logging
import sys
from pathlib import Path

from src.core.config import BASE_DIR
from src.models.scenario import InstanceSet, Scenario
from src.models.space import ParameterSpace
from src.services.space.pcs import parse_pcs, serialize_pcs
from src.services.synthetic.surfaces import CrashRule, SyntheticSurface, SyntheticTarget, save_surface

VALLEY_PCS = """
heuristic {greedy,random,balanced} [greedy]
restart {luby,geometric,fixed} [luby]
depth [1,20] [3] i
tries [0,50] [40] i
ratio [0.0,1.0] [0.9]
"""

CONDITIONAL_TRAP_PCS = """
switch {off,on} [off]
level [1,10] [2] i
mode {x,y} [x]
gain [0.0,1.0] [0.5]
level | switch in {on}
gain | switch in {on}
"""

CRASH_REGION_PCS = """
x [0.0,1.0] [0.2]
y [0.0,1.0] [0.5]
mode {p,q} [p]
"""

FORBIDDEN_EDGE_PCS = """
a {0,1,2} [0]
b {0,1,2} [0]
c [0.0,1.0] [0.0]
{a=2, b=2}
"""

TWO_CLUSTER_PCS = """
p [0.0,1.0] [0.5]
q {u,v} [u]
"""

KINDS = ("valley", "conditional_trap", "crash_region", "forbidden_edge", "two_cluster")


def _scales(space: ParameterSpace) -> dict[str, float]:
    return {spec.name: float(spec.upper - spec.lower) for spec in space.parameters if spec.is_numeric}


def standard_surface(kind: str, noise: float = 0.0) -> tuple[ParameterSpace, SyntheticSurface]:
    """A small reference space and surface of the given kind, default placed off the optimum."""
    if kind == "valley":
        space = parse_pcs(VALLEY_PCS)
        surface = SyntheticSurface(
            kind="valley",
            optimum={"heuristic": "balanced", "restart": "geometric", "depth": 12, "tries": 10, "ratio": 0.3},
            base_runtime=0.2,
            scales=_scales(space),
        )
    elif kind == "conditional_trap":
        space = parse_pcs(CONDITIONAL_TRAP_PCS)
        surface = SyntheticSurface(
            kind="conditional_trap",
            optimum={"level": 7, "mode": "y", "gain": 0.8},
            switch="switch",
            switch_on="on",
            trap_runtime=1.5,
            base_runtime=0.1,
            scales=_scales(space),
        )
    elif kind == "crash_region":
        space = parse_pcs(CRASH_REGION_PCS)
        surface = SyntheticSurface(
            kind="crash_region",
            optimum={"x": 0.7, "y": 0.4, "mode": "q"},
            crash_rules=[CrashRule(parameter="x", lower=0.55, upper=1.0), CrashRule(parameter="mode", values=["q"])],
            base_runtime=0.2,
            scales=_scales(space),
        )
    elif kind == "forbidden_edge":
        space = parse_pcs(FORBIDDEN_EDGE_PCS)
        surface = SyntheticSurface(
            kind="forbidden_edge",
            optimum={"a": "2", "b": "2", "c": 0.5},
            weights={"a": 2.0, "b": 1.0},
            base_runtime=0.2,
            scales=_scales(space),
        )
    elif kind == "two_cluster":
        space = parse_pcs(TWO_CLUSTER_PCS)
        surface = SyntheticSurface(
            kind="two_cluster",
            optimum={"p": 0.5, "q": "u"},
            # Both clusters prefer q=u; they disagree only on the fine placement of p.
            cluster_optima={"A": {"p": 0.4, "q": "u"}, "B": {"p": 0.6, "q": "u"}},
            cluster_offsets={"A": 0.0, "B": 0.1},
            weights={"p": 1.0, "q": 2.0},
            base_runtime=0.4,
            granularity=0.001,
            scales=_scales(space),
        )
    else:
        raise ValueError(f"Unknown surface kind: {kind!r}")
    return space, surface.model_copy(update={"noise": noise})


def instance_names(count: int, prefix: str = "inst", start: int = 0) -> list[str]:
    return [f"{prefix}_{i:04d}" for i in range(start, start + count)]


def cluster_instances(count: int, share_a: float = 0.5, start: int = 0) -> list[str]:
    """Instance ids for the two-cluster surface, `share_a` of them in cluster A."""
    if not 0.0 <= share_a <= 1.0:
        raise ValueError(f"share_a must lie in [0, 1], got {share_a}")
    in_a = round(count * share_a)
    return instance_names(in_a, "A", start) + instance_names(count - in_a, "B", start)


def synthetic_scenario(
    kind: str,
    n_train: int = 50,
    n_test: int = 50,
    cutoff: float = 2.0,
    noise: float = 0.0,
    par_k: int = 10,
    cores: int = 1,
    train_ids: list[str] | None = None,
    test_ids: list[str] | None = None,
    cluster_mix: tuple[float, float] = (0.5, 0.5),
) -> Scenario:
    """
    An in-process scenario on a standard surface. For two_cluster, `cluster_mix` gives the
    share of cluster-A instances in the train and test sets.
    """
    space, surface = standard_surface(kind, noise)
    default_train, default_test = _instance_split(kind, n_train, n_test, cluster_mix)
    train = train_ids or default_train
    test = test_ids or default_test
    return Scenario(
        target_command=f"synthetic:{kind}",
        space=space,
        train=InstanceSet.of(train),
        test=InstanceSet.of(test),
        cutoff_seconds=cutoff,
        par_k=par_k,
        cores=cores,
        deterministic=noise == 0,
        target=SyntheticTarget(surface),
    )


def _instance_split(kind: str, n_train: int, n_test: int, cluster_mix: tuple[float, float]) -> tuple[list[str], list[str]]:
    if kind == "two_cluster":
        return cluster_instances(n_train, cluster_mix[0]), cluster_instances(n_test, cluster_mix[1], start=n_train)
    return instance_names(n_train, "train"), instance_names(n_test, "test")


def write_bundle(
    out_dir: Path,
    kind: str,
    n_train: int = 50,
    n_test: int = 50,
    cutoff: float = 2.0,
    noise: float = 0.0,
    cluster_mix: tuple[float, float] = (0.5, 0.5),
) -> dict[str, Path]:
    """
    Writes a ready-to-run scenario bundle: surface JSON, PCS, instance lists, an
    in-process scenario and a scenario that drives the wrapper executable.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    space, surface = standard_surface(kind, noise)
    train, test = _instance_split(kind, n_train, n_test, cluster_mix)

    paths = {
        "surface": out_dir / "surface.json",
        "pcs": out_dir / "params.pcs",
        "train": out_dir / "train.txt",
        "test": out_dir / "test.txt",
        "scenario": out_dir / "scenario.txt",
        "wrapper_scenario": out_dir / "scenario-wrapper.txt",
    }
    save_surface(surface, paths["surface"])
    paths["pcs"].write_text(serialize_pcs(space), encoding="utf-8")
    paths["train"].write_text("\n".join(train) + "\n", encoding="utf-8")
    paths["test"].write_text("\n".join(test) + "\n", encoding="utf-8")

    common = [
        "paramfile = params.pcs",
        "instance_file = train.txt",
        "test_instance_file = test.txt",
        f"cutoff_time = {cutoff}",
        f"deterministic = {'true' if noise == 0 else 'false'}",
    ]
    paths["scenario"].write_text("\n".join(["algo = synthetic:surface.json", *common]) + "\n", encoding="utf-8")
    wrapper = f"{sys.executable} -m src.services.synthetic.wrapper"
    paths["wrapper_scenario"].write_text(
        "\n".join(
            [
                f"algo = {wrapper}",
                *common,
                f"execdir = {BASE_DIR}",
                f"instance_info = {paths['surface'].resolve()}",
            ]
        )
        + "\n",
        encoding="utf-8",
    )
    logging.info(f"Wrote {kind} bundle to {out_dir}.")
    return paths
