import numpy as np
import pytest

from pdcfield.cli import main, _read_image
from pdcfield.plotio import write_csv, read_csv, render_plot

CONFIG = """
[pump]
degenerate_wavelength = 0.8 um
bandwidth = 5e11 rad/s
waist = 0.2 mm

[seed]
photons = 4
waist = 0.2 mm
eta = 1
g_factor = 1.0

[crystal]
length = 3 mm
cross_section = 1e-22 m^2
pdc_angle = 10 mrad
squeezing = 1.0

[detector]
focal_length = 100 mm
aperture = 2 mm
bandwidth = 1e9 rad/s
"""


@pytest.fixture()
def config_path(tmp_path):
    path = tmp_path / "experiment.cfg"
    path.write_text(CONFIG)
    return str(path)


def test_csv_round_trip(tmp_path):
    path = tmp_path / "one.csv"
    write_csv(path, ["a", "b"], [[1.5, -2.25e-7]])
    header, rows = read_csv(path)
    assert header == ["a", "b"]
    assert rows == [[1.5, -2.25e-7]]


def test_csv_rejects_empty(tmp_path):
    with pytest.raises(ValueError):
        write_csv(tmp_path / "empty.csv", ["a"], [])


def test_render_plot_writes_svg(tmp_path):
    x = np.linspace(0, 1, 20)
    path = render_plot(tmp_path / "p.svg", [(x, x**2, "sq")], "x", "y", "t")
    text = path.read_text()
    assert text.startswith("<svg")
    assert "polyline" in text


def test_unknown_subcommand_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_missing_config_usage_error(tmp_path):
    code = main(["--outdir", str(tmp_path), "orders", "--config", str(tmp_path / "nope.cfg")])
    assert code == 2


def test_efficiency_csv(tmp_path):
    code = main([
        "--outdir", str(tmp_path), "efficiency",
        "--beta", "0.4", "--a-range", "-16:16", "--no-svg",
    ])
    assert code == 0
    header, rows = read_csv(tmp_path / "efficiency.csv")
    assert header == ["a", "f"]
    arr = np.asarray(rows)
    peak = arr[np.argmax(arr[:, 1]), 0]
    assert -0.45 <= peak <= -0.33


def test_efficiency_bad_range(tmp_path):
    assert main(["--outdir", str(tmp_path), "efficiency", "--a-range", "5:1"]) == 2


def test_background_csv_sorted(tmp_path, config_path):
    code = main([
        "--outdir", str(tmp_path), "background", "--config", config_path,
        "--points", "101", "--no-svg",
    ])
    assert code == 0
    header, rows = read_csv(tmp_path / "background.csv")
    radii = [row[0] for row in rows]
    assert radii == sorted(radii)
    assert header[0] == "r_mm"


def test_orders_csv(tmp_path, config_path):
    code = main([
        "--outdir", str(tmp_path), "orders", "--config", config_path,
        "--m-max", "3", "--points", "101", "--no-svg",
    ])
    assert code == 0
    header, rows = read_csv(tmp_path / "orders.csv")
    assert header[0] == "x_mm"
    assert header[1:5] == ["order0_amp", "order1_amp", "order2_amp", "order3_amp"]
    assert len(rows) == 101


def test_combined_idler_peak_tallest_at_g1(tmp_path, config_path):
    code = main([
        "--outdir", str(tmp_path), "combined", "--config", config_path,
        "--G", "0.8,1.0,1.2", "--points", "801", "--no-svg",
    ])
    assert code == 0
    header, rows = read_csv(tmp_path / "combined.csv")
    arr = np.asarray(rows)
    x = arr[:, 0]
    idler_side = x < -0.2  # idler features sit at negative x
    peaks = [np.max(arr[idler_side, 1 + j]) for j in range(3)]
    assert peaks[1] > peaks[0] and peaks[1] > peaks[2]


def test_image_deterministic(tmp_path, config_path):
    args = [
        "--outdir", str(tmp_path), "image", "--config", config_path,
        "--nx", "24", "--ny", "12", "--noise", "poisson", "--seed", "5",
        "--exposure", "30", "--no-svg",
    ]
    assert main(args) == 0
    first = (tmp_path / "image.csv").read_bytes()
    assert main(args) == 0
    assert (tmp_path / "image.csv").read_bytes() == first


def test_image_header_contract(tmp_path, config_path):
    main([
        "--outdir", str(tmp_path), "image", "--config", config_path,
        "--nx", "8", "--ny", "8", "--no-svg",
    ])
    header, _ = read_csv(tmp_path / "image.csv")
    assert header == ["x_mm", "y_mm", "intensity"]


def test_fit_round_trip_via_cli(tmp_path, config_path):
    main([
        "--outdir", str(tmp_path), "image", "--config", config_path,
        "--nx", "48", "--ny", "16", "--exposure", "40", "--no-svg",
    ])
    code = main([
        "--outdir", str(tmp_path), "fit", "--config", config_path,
        "--image", str(tmp_path / "image.csv"), "--exposure", "40",
        "--init", "seed_photons=2.0,squeezing=0.6", "--no-svg",
    ])
    assert code == 0
    # first column is a parameter name, so read the text directly
    text = (tmp_path / "fit.csv").read_text().splitlines()
    assert text[0] == "parameter,value,std_error"
    values = {ln.split(",")[0]: float(ln.split(",")[1]) for ln in text[1:]}
    assert values["seed_photons"] == pytest.approx(4.0, rel=1e-3)
    assert values["squeezing"] == pytest.approx(1.0, rel=1e-3)


def test_read_image_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b,c\n1,2,3\n")
    from pdcfield.config import ConfigError

    with pytest.raises(ConfigError):
        _read_image(path)
