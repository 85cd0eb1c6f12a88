import pytest

from housemove.config import RunConfig, load_config, parse_curve, parse_drift
from housemove.errors import ConfigError, ModelError

BASE = {
    "corridor": {"lower": "constant 0", "upper": "cosine 0.1 1 0 1.2"},
    "drift": {"mu": "linear 0 -1"},
    "grid": {"n_steps": "64"},
    "run": {"seed": "7", "workers": "2", "output": "out/a"},
}


def _with(**sections):
    cfg = {name: dict(keys) for name, keys in BASE.items()}
    for name, keys in sections.items():
        if keys is None:
            cfg.pop(name, None)
        else:
            cfg.setdefault(name, {}).update(keys)
    return cfg


def test_parse_curve_and_drift():
    assert parse_curve("cosine 0.1 1")(0.0) == pytest.approx(0.1)
    assert parse_curve("linear 1 2", (0.0, 2.0))(2.0) == pytest.approx(5.0)
    assert parse_drift("polynomial 0 0").is_zero
    with pytest.raises(ValueError):
        parse_curve("spline 1 2")
    with pytest.raises(ValueError):
        parse_drift("linear 1")


def test_load_builds_corridor_and_settings():
    cfg = RunConfig.load(_with(density={"paths": "300", "nodes": "8"}, sampling={"sampler": "rejection"}))
    assert cfg.corridor.b == pytest.approx(1.3)
    assert cfg.drift.mu(1.0) == pytest.approx(-1.0)
    assert cfg.seed == 7 and cfg.workers == 2
    settings = cfg.kernel_settings()
    assert (settings.n_steps, settings.paths, settings.nodes, settings.sampler) == (64, 300, 8, "rejection")
    assert cfg.effective_schedule.eps0 == pytest.approx(0.2 * cfg.corridor.min_width)
    assert cfg.suite[0] == "chapman_kolmogorov"


def test_hash_ignores_workers_and_output_but_not_seed():
    a = RunConfig.load(BASE)
    b = RunConfig.load(_with(run={"workers": "8", "output": "elsewhere"}))
    c = RunConfig.load(BASE, seed=8)
    assert a.config_hash == b.config_hash
    assert a.config_hash != c.config_hash
    assert c.seed == 8
    assert RunConfig.load(BASE, workers=3).config_hash == a.config_hash


@pytest.mark.parametrize(
    "sections, message",
    [
        ({"grid": {"n_steps": "ten"}}, r"\[grid\] n_steps"),
        ({"grid": {"n_steps": "63"}}, r"\[grid\] n_steps: must be even"),
        ({"colour": {"x": "1"}}, r"\[colour\]: unknown section"),
        ({"run": {"speed": "1"}}, r"\[run\] speed: unknown key"),
        ({"corridor": {"upper": "constant -1"}}, r"\[corridor\] upper"),
        ({"sde": {"sigma": "1"}}, r"\[sde\]: give either"),
        ({"verify": {"suite": "reversal,bogus"}}, r"\[verify\] suite"),
        ({"verify": {"replicates": "1"}}, r"\[verify\] replicates: must be >= 2"),
        ({"density": {"t": "1.5"}}, r"\[density\] t"),
        ({"sampling": {"resample_threshold": "0"}}, r"\[sampling\] resample_threshold"),
    ],
)
def test_invalid_configs_name_the_key(sections, message):
    with pytest.raises(ConfigError, match=message):
        RunConfig.load(_with(**sections))


def test_sde_section_maps_the_corridor():
    cfg = RunConfig.load(_with(drift=None, sde={"nu": "0 -1", "sigma": "2"}, corridor={"upper": "constant 1"}))
    assert cfg.scale_map is not None and cfg.sde is not None
    assert cfg.corridor.upper(0.5) == pytest.approx(0.5)
    # μ(x) = ν(σx)/σ = −x for ν(u) = −u
    assert cfg.drift.mu(0.25) == pytest.approx(-0.25)


def test_nonpositive_sigma_is_a_model_error():
    with pytest.raises(ModelError):
        RunConfig.load(_with(drift=None, sde={"sigma": "0 1", "range": "-1 1"}))


def test_verify_options_and_file_loading(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text(
        "[corridor]\nlower = constant 0\nupper = constant 1  # flat\n\n"
        "[verify]\nsuite = reversal\npaths = 500\nm0 = 1 2\ntimes = 0.2 0.4 0.6\nreplicates = 4\n"
    )
    cfg = load_config(path, seed=3)
    opts = cfg.verify_options()
    assert (opts.paths, opts.m0, opts.times, opts.replicates) == (500, (1, 2), (0.2, 0.4, 0.6), 4)
    assert cfg.suite == ["reversal"]
    assert cfg.drift.is_zero
    with pytest.raises(ConfigError, match="does not exist"):
        load_config(tmp_path / "missing.ini")
