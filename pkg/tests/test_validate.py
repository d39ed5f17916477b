"""Validation-table integration: the CLI `validate` subcommand on the
standard configuration must pass every check and exit 0."""

from pdcfield.cli import main

from test_cli import CONFIG


def test_validate_cli_all_pass(tmp_path, capsys):
    path = tmp_path / "experiment.cfg"
    path.write_text(CONFIG)
    code = main(["--outdir", str(tmp_path), "validate", "--config", str(path)])
    out = capsys.readouterr().out
    assert "checks passed" in out
    lines = (tmp_path / "validate.csv").read_text().splitlines()
    assert lines[0] == "check,value,tolerance,passed,seconds"
    flags = [float(ln.rsplit(",", 2)[-2]) for ln in lines[1:]]
    assert len(flags) >= 14
    assert all(f == 1.0 for f in flags), out
    assert code == 0
