import numpy as np
import pytest

from petfisher import io as pio
from petfisher import build_gaussian_system_matrix
from petfisher.errors import InvalidArgumentError


def test_matrix_round_trip(tmp_path):
    p = build_gaussian_system_matrix(7, 5, 1.3).p
    pio.write_matrix(tmp_path / "p.csv", p)
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "# pixels=7 detectors=5"
    np.testing.assert_array_equal(pio.read_matrix(tmp_path / "p.csv"), p)


def test_matrix_without_header(tmp_path):
    (tmp_path / "p.csv").write_text("0.25,0.75\n1.0,0.0\n")
    assert pio.read_matrix(tmp_path / "p.csv").shape == (2, 2)


def test_header_mismatch(tmp_path):
    (tmp_path / "p.csv").write_text("# pixels=3 detectors=2\n0.25,0.75\n1.0,0.0\n")
    with pytest.raises(InvalidArgumentError):
        pio.read_matrix(tmp_path / "p.csv")


def test_ragged_and_garbage(tmp_path):
    (tmp_path / "a.csv").write_text("1,0\n1\n")
    (tmp_path / "b.csv").write_text("1,x\n")
    for name in ("a.csv", "b.csv"):
        with pytest.raises(InvalidArgumentError):
            pio.read_matrix(tmp_path / name)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        pio.read_vector(tmp_path / "none.csv")


def test_vector_round_trip(tmp_path):
    pio.write_vector(tmp_path / "n.csv", [3, 0, 12], kind="detectors", integer=True)
    assert (tmp_path / "n.csv").read_text() == "# detectors=3\n3\n0\n12\n"
    np.testing.assert_array_equal(pio.read_vector(tmp_path / "n.csv", kind="detectors"), [3, 0, 12])
    pio.write_vector(tmp_path / "l.csv", [0.1, 1 / 3])
    assert pio.read_vector(tmp_path / "l.csv")[1] == 1 / 3
    (tmp_path / "bad.csv").write_text("# pixels=4\n1\n2\n")
    with pytest.raises(InvalidArgumentError):
        pio.read_vector(tmp_path / "bad.csv")


def test_trajectory_dump(tmp_path):
    traj = np.array([[1.0, 2.0], [1.5, 1.5]])
    pio.write_trajectory(tmp_path / "t.csv", tmp_path / "ll.csv", traj, [-3.0, -2.5])
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "iteration,pixel,lambda"
    assert lines[1:] == ["0,1,1.0", "0,2,2.0", "1,1,1.5", "1,2,1.5"]
    assert (tmp_path / "ll.csv").read_text().splitlines() == ["iteration,log_likelihood", "0,-3.0", "1,-2.5"]


def test_table_writes_nan_as_empty(tmp_path):
    pio.write_table(tmp_path / "t.csv", {"pixel": [1, 2], "nts": [2.0, float("nan")]})
    assert (tmp_path / "t.csv").read_text().splitlines() == ["pixel,nts", "1,2.0", "2,"]
