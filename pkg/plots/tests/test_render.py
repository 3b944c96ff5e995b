import numpy as np
import pytest

from ogplots.cli import main
from ogplots.render import render
from ogplots.schema import SchemaError, load_log, load_metadata, required_columns

from conftest import synthetic_run


class TestSchema:
    def test_required_columns_cover_agents_and_options(self, run_files):
        _, meta_path = run_files
        meta = load_metadata(meta_path)
        cols = required_columns(meta)
        assert "x2_py" in cols
        assert "sigma1_2" in cols
        assert "poi2" in cols

    def test_missing_columns_listed(self, run_files, tmp_path):
        csv_path, meta_path = run_files
        text = csv_path.read_text().splitlines()
        header = text[0].split(",")
        drop = [header.index("poi1"), header.index("poi2")]
        keep = [k for k in range(len(header)) if k not in drop]
        trimmed = tmp_path / "trimmed.csv"
        with open(trimmed, "w") as fh:
            for line in text:
                parts = line.split(",")
                fh.write(",".join(parts[k] for k in keep) + "\n")
        with pytest.raises(SchemaError) as exc_info:
            load_log(trimmed, load_metadata(meta_path))
        msg = str(exc_info.value)
        assert "poi1" in msg and "poi2" in msg

    def test_empty_log_rejected(self, run_files, tmp_path):
        _, meta_path = run_files
        empty = tmp_path / "empty.csv"
        empty.write_text("t,time\n")
        with pytest.raises(SchemaError):
            load_log(empty, load_metadata(meta_path))


class TestRender:
    def test_writes_figure_with_panels(self, run_files, tmp_path):
        csv_path, meta_path = run_files
        out = tmp_path / "fig.png"
        summary = render(csv_path, meta_path, out)
        assert out.exists() and out.stat().st_size > 10_000
        assert summary.n_timeseries_panels == 4
        assert summary.n_agents == 2
        assert summary.rows == 31

    def test_snapshot_times_every_interval(self, run_files, tmp_path):
        csv_path, meta_path = run_files
        summary = render(csv_path, meta_path, tmp_path / "fig.png",
                         snapshot_interval=3.0)
        assert summary.snapshot_times == pytest.approx([0.0, 3.0, 6.0])

    def test_custom_interval(self, run_files, tmp_path):
        csv_path, meta_path = run_files
        summary = render(csv_path, meta_path, tmp_path / "fig.png",
                         snapshot_interval=2.0)
        assert summary.snapshot_times == pytest.approx([0.0, 2.0, 4.0, 6.0])

    def test_deterministic_bytes(self, run_files, tmp_path):
        csv_path, meta_path = run_files
        out1 = tmp_path / "a.png"
        out2 = tmp_path / "b.png"
        render(csv_path, meta_path, out1)
        render(csv_path, meta_path, out2)
        assert out1.read_bytes() == out2.read_bytes()

    def test_inputs_untouched(self, run_files, tmp_path):
        csv_path, meta_path = run_files
        before = (csv_path.read_bytes(), meta_path.read_bytes())
        render(csv_path, meta_path, tmp_path / "fig.png")
        assert (csv_path.read_bytes(), meta_path.read_bytes()) == before

    def test_rejects_bad_interval(self, run_files, tmp_path):
        csv_path, meta_path = run_files
        with pytest.raises(ValueError):
            render(csv_path, meta_path, tmp_path / "fig.png",
                   snapshot_interval=0.0)


class TestCli:
    def test_render_success(self, run_files, tmp_path, capsys):
        csv_path, meta_path = run_files
        out = tmp_path / "fig.png"
        code = main(["render", "--csv", str(csv_path), "--meta", str(meta_path),
                     "--out", str(out)])
        assert code == 0
        assert out.exists()
        assert "wrote" in capsys.readouterr().out

    def test_schema_error_exit(self, run_files, tmp_path, capsys):
        _, meta_path = run_files
        bad = tmp_path / "bad.csv"
        bad.write_text("t,time\n0,0.0\n")
        code = main(["render", "--csv", str(bad), "--meta", str(meta_path),
                     "--out", str(tmp_path / "fig.png")])
        assert code == 2
        assert "missing required columns" in capsys.readouterr().err

    def test_missing_file_exit(self, run_files, tmp_path):
        _, meta_path = run_files
        code = main(["render", "--csv", str(tmp_path / "nope.csv"),
                     "--meta", str(meta_path),
                     "--out", str(tmp_path / "fig.png")])
        assert code == 2
