"""Demo pipeline for couplekit: coupling analysis on the synthetic floating-platform case.

Run with: pymake
List tasks: pymake list
"""

from pathlib import Path

from pymake import sh, task

OUTPUT_DIR = Path("output")
TOUCH_DIR = OUTPUT_DIR / ".touch"
CASE_DIR = OUTPUT_DIR / "fowt"
MODEL_DIR = CASE_DIR / "models"
DCA_DIR = CASE_DIR / "dca"

SPACE = CASE_DIR / "space.json"
DATA = CASE_DIR / "data.csv"
PROBLEM = CASE_DIR / "problem.json"
INPUTS = CASE_DIR / "inputs.csv"
REPORT = DCA_DIR / "report.json"
PLAN = CASE_DIR / "plan.json"
SUBSET = CASE_DIR / "subset.json"
COMPARISON = CASE_DIR / "compare.csv"
VALIDATION = CASE_DIR / "validation.json"

CHANNELS = "m_ptfm,max_theta_ptfm,max_a_nac"
SEED = 0


def _run(*argv: object) -> None:
    from couplekit.cli import main

    code = main([str(a) for a in argv])
    if code != 0:
        raise SystemExit(code)


@task(outputs=[SPACE, DATA, PROBLEM])
def bench_files(n: int = 750):
    """Write the synthetic case: design space, LHS dataset, problem file."""
    _run("bench-fowt", "--seed", SEED, "--n", n, "--out", CASE_DIR)


@task(inputs=[SPACE], outputs=[INPUTS])
def sample(n: int = 750):
    """Fresh Latin hypercube design over the same space (inputs only)."""
    _run("sample", SPACE, "--n", n, "--seed", SEED, "--out", INPUTS)


@task(inputs=[bench_files, SPACE, DATA], touch=TOUCH_DIR / "train")
def train(m: int | None = None):
    """Fit one sparse GP per channel into output/fowt/models/."""
    TOUCH_DIR.mkdir(parents=True, exist_ok=True)
    extra = ["--m", m] if m is not None else []
    _run("train", SPACE, DATA, "--channels", CHANNELS, "--seed", SEED, "--label", "synthetic", "--out", MODEL_DIR, *extra)


@task(inputs=[bench_files, SPACE, DATA], outputs=[VALIDATION])
def validate(holdout: float = 0.2):
    """Hold-out accuracy of the surrogates."""
    _run("validate", SPACE, DATA, "--channels", CHANNELS, "--holdout", holdout, "--seed", SEED, "--out", VALIDATION)


@task(inputs=[train], outputs=[REPORT])
def dca(ns: int = 11, norm: str = "rms"):
    """Coupling and sensitivity matrices plus heatmaps into output/fowt/dca/."""
    _run("dca", PROBLEM, "--ns", ns, "--norm", norm, "--seed", SEED, "--out", DCA_DIR)


@task(inputs=[dca, REPORT], outputs=[PLAN])
def plan(tau_group: float = 0.5, tau_influence: float = 0.25):
    """Sequential decomposition from the coupling report."""
    _run("plan", REPORT, "--tau-group", tau_group, "--tau-influence", tau_influence, "--out", PLAN)


@task(inputs=[dca, REPORT], outputs=[SUBSET])
def subset(k: int = 2, mode: str = "coupling_aware"):
    """Influential subset from the coupling report."""
    _run("subset", REPORT, "--k", k, "--mode", mode, "--out", SUBSET)


@task(inputs=[plan, subset, PLAN, SUBSET], outputs=[COMPARISON])
def compare(random: int = 16, starts: int = 5):
    """Simultaneous vs. planned vs. subset vs. random sequences."""
    _run(
        "compare", PROBLEM,
        "--plans", PLAN,
        "--subsets", SUBSET,
        "--random", random,
        "--starts", starts,
        "--seed", SEED,
        "--out", COMPARISON,
    )


@task(inputs=[sample, compare])
def demo():
    """Run the whole synthetic pipeline."""
    pass


@task()
def test():
    """Run the test suite."""
    sh("uv run pytest")


@task()
def lint():
    """Lint with ruff."""
    sh("uv run ruff check src tests")


task.default("demo")
