import numpy as np
import pytest

from treg.fileio import (
    read_pgm,
    read_pgm_mask,
    read_raw,
    read_trace_csv,
    trace_to_csv,
    write_pgm,
    write_raw,
    write_trace_csv,
)
from treg.sampler import RunTrace, StepRecord


class TestPgm:
    def test_uint8_round_trip(self, tmp_path):
        img = np.arange(12, dtype=np.uint8).reshape(3, 4) * 20
        p = tmp_path / "a.pgm"
        write_pgm(p, img)
        assert np.array_equal(read_pgm(p), img)

    def test_float_written_bytes_reread_stable(self, tmp_path):
        rng = np.random.default_rng(0)
        img = rng.uniform(-0.2, 1.2, (8, 8))
        p = tmp_path / "b.pgm"
        write_pgm(p, img)
        first = read_pgm(p)
        write_pgm(tmp_path / "c.pgm", first.astype(float) / 255.0)
        assert np.array_equal(read_pgm(tmp_path / "c.pgm"), first)

    def test_mask_round_trip(self, tmp_path):
        mask = (np.random.default_rng(1).uniform(size=(5, 7)) > 0.5).astype(float)
        p = tmp_path / "m.pgm"
        write_pgm(p, (mask * 255).astype(np.uint8))
        assert np.array_equal(read_pgm_mask(p), mask)

    def test_rejects_non_p5(self, tmp_path):
        p = tmp_path / "x.pgm"
        p.write_bytes(b"P2\n2 2\n255\n0 1 2 3\n")
        with pytest.raises(ValueError, match="binary PGM"):
            read_pgm(p)


class TestRaw:
    def test_round_trip_exact(self, tmp_path):
        vec = np.random.default_rng(2).standard_normal(37)
        p = tmp_path / "v.f64"
        write_raw(p, vec, sigma0=0.1, seed=9)
        back, meta = read_raw(p)
        assert np.array_equal(back, vec)
        assert meta == {"n": 37, "sigma0": 0.1, "seed": 9}

    def test_header_format(self, tmp_path):
        p = tmp_path / "v.f64"
        write_raw(p, np.zeros(3), sigma0=0.25, seed=4)
        header = p.read_bytes().split(b"\n", 1)[0]
        assert header == b"TREGV1 n=3 sigma0=0.25 seed=4"

    def test_missing_header_rejected(self, tmp_path):
        p = tmp_path / "bad.f64"
        p.write_bytes(b"NOPE n=1\n" + np.zeros(1).tobytes())
        with pytest.raises(ValueError, match="TREGV1"):
            read_raw(p)

    def test_truncated_payload_rejected(self, tmp_path):
        p = tmp_path / "t.f64"
        write_raw(p, np.zeros(4))
        data = p.read_bytes()
        p.write_bytes(data[:-8])
        with pytest.raises(ValueError, match="expected 4"):
            read_raw(p)


class TestTraceCsv:
    def trace(self):
        t = RunTrace()
        t.records.append(StepRecord(40, "latent_opt", 1.5, 0.25, -0.125))
        t.records.append(StepRecord(35, "plain", 0.7531892183721894, 0.1, 0.0))
        return t

    def test_round_trip_full_precision(self, tmp_path):
        p = tmp_path / "t.csv"
        write_trace_csv(p, self.trace())
        back = read_trace_csv(p)
        for a, b in zip(back.records, self.trace().records):
            assert a == b

    def test_columns(self):
        text = trace_to_csv(self.trace())
        assert text.splitlines()[0] == "t,branch,data_consistency,dsm_loss,null_similarity"

    def test_write_is_byte_deterministic(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_trace_csv(a, self.trace())
        write_trace_csv(b, self.trace())
        assert a.read_bytes() == b.read_bytes()
