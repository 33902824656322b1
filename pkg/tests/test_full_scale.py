"""Full-scale study runs (K = 2000), excluded by default: pytest -m slow."""

import pytest

from obscheck import LcdConfig, StudyConfig, load_model, run_study


@pytest.mark.slow
def test_part2_statistics_at_full_scale():
    model = load_model("unknown_variance")
    cfg = StudyConfig(
        model=model, T_list=(4,), K=2000, lcd=LcdConfig(max_iters=150)
    )
    report = run_study(cfg)
    part2 = report.part2[0]
    var_anchor = 0.32
    lvar_anchor = 0.48
    assert abs(part2.empirical_mean["b"] - 0.8) < 0.01 * 0.8
    assert abs(part2.empirical_variance["b"] - var_anchor) < 0.15 * var_anchor
    assert abs(part2.mean_local_variance["b"] - lvar_anchor) < 0.05 * lvar_anchor
