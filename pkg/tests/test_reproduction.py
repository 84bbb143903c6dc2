import pytest

from pushforward.config import parse_config
from pushforward.distributed import resolve_jobs
from pushforward.harness import SweepConfig, horizon_sweep


def _final_rows(preset: str, n: int, tmp_path):
    config = parse_config(SweepConfig, ["--config", preset, "--run.horizons", str(n), "--output.dir", str(tmp_path)])
    result, table = horizon_sweep(config, resolve_jobs(config.jobs))
    assert result.ok, f"failed seeds: {result.failed_seeds}"
    assert all(row.num_seeds >= 10 for row in table)
    return {row.agent: row for row in table}


@pytest.mark.slow
def test_daif_leads_on_the_longest_latent_chain(tmp_path):
    rows = _final_rows("latent_riverswim_sweep", 12, tmp_path)
    daif = rows["daif"]
    for baseline in ("iqql", "psrl_pi"):
        assert daif.mean > rows[baseline].mean
        assert daif.mean - daif.stderr > rows[baseline].mean


@pytest.mark.slow
def test_agents_agree_on_a_short_plain_chain(tmp_path):
    rows = _final_rows("riverswim_sweep", 4, tmp_path)
    bands = {agent: (row.mean - 2 * row.stderr, row.mean + 2 * row.stderr) for agent, row in rows.items()}
    assert set(bands) == {"psrl_pi", "iqql", "daif"}
    assert max(lo for lo, _ in bands.values()) <= min(hi for _, hi in bands.values())
