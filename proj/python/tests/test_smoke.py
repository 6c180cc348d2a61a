import json
import math
import os
import pathlib

import pytest

import easteer

DATA = pathlib.Path(os.environ.get("EASTEER_TEST_DATA", pathlib.Path(__file__).resolve().parents[2] / "tests" / "data"))


def test_entropy_cases():
    assert easteer.shannon_entropy([50, 50], 2) == pytest.approx(1.0, abs=1e-12)
    assert easteer.shannon_entropy([100, 0], 2) == 0.0
    p = 0.7
    expected = -(p * math.log2(p) + (1 - p) * math.log2(1 - p))
    assert easteer.shannon_entropy([70, 30], 2) == pytest.approx(expected, abs=1e-12)


def test_errors_carry_code():
    with pytest.raises(easteer.EasteerError, match="EmptyCounts"):
        easteer.shannon_entropy([0, 0], 2)


def test_normalize_and_cosine():
    v = easteer.normalize([3.0, 4.0])
    assert v == pytest.approx([0.6, 0.8])
    assert easteer.cosine_similarity([1.0, 0.0], [0.0, 2.0]) == 0.0


def test_derive_matches_numpy():
    np = pytest.importorskip("numpy")
    rng = np.random.default_rng(3)
    base = rng.normal(size=(5, 8)).astype(np.float32)
    attr = rng.normal(size=(5, 8)).astype(np.float32)
    direction, raw = easteer.derive_attribute_vector([(b.tolist(), a.tolist()) for b, a in zip(base, attr)])
    mean = (attr.astype(np.float64) - base).mean(axis=0)
    assert raw == pytest.approx(np.linalg.norm(mean), rel=1e-6)
    assert direction == pytest.approx((mean / np.linalg.norm(mean)).tolist(), abs=1e-6)


def test_table_compose_and_probes(tmp_path):
    table = easteer.LookupTable.load(str(DATA / "synthetic" / "table"))
    assert len(table) == 14
    assert table.created_with_k == 10
    base = [0.5] * table.dim
    assert table.compose(base, [("male", 0.0)]) == base
    steered = table.compose(base, [("female", 1.25)])
    female = table.vector("female")
    assert [s - b for s, b in zip(steered, base)] == pytest.approx([1.25 * x for x in female], abs=1e-6)
    labels, matrix = table.orthogonality(["male", "female"])
    assert labels == ["male", "female"]
    assert matrix[0][1] == matrix[1][0]
    assert table.composability("black", "female") > 0.9
    table.save(str(tmp_path / "copy"))
    assert (tmp_path / "copy.tensors").read_bytes() == (DATA / "synthetic" / "table.tensors").read_bytes()


def test_sampling_reference():
    names = ["white male", "white female", "black male", "black female",
             "asian male", "asian female", "indian male", "indian female"]
    seq = easteer.sample_attributes({n: 1.0 for n in names}, 64, 20240607)
    assert seq == (DATA / "sampling_reference.txt").read_text().splitlines()


def test_ccs():
    assert easteer.ccs_image([0.8, 0.6, 0.7]) == pytest.approx(0.7)
    assert easteer.ccs_condition([[1.0], [1.0, 1.0, 0.0, 0.0]]) == pytest.approx(0.75)
    v = easteer.ccs_validation([[0.6], [0.7]], [[0.55]], [[0.1]])
    assert v["pass"] and v["real"]["median"] == pytest.approx(0.65)


def test_benchmark_replay_matches_golden(tmp_path):
    out = tmp_path / "run"
    rc = easteer.run_cli(["benchmark", "--config", str(DATA / "bench" / "config.json"), "--output-dir", str(out)])
    assert rc == 0
    assert (out / "report.json").read_bytes() == (DATA / "bench" / "golden_report.json").read_bytes()
    report = json.loads(easteer.report_json(str(out)))
    assert len(report["rows"]) == 12  # 3 methods x 4 target concepts
