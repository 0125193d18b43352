"""CSV parsers, formulation JSON, report tables and the command line."""

import json

import numpy as np
import pandas as pd
import pytest

from matchain.data_parser import library_at, parse_growth_csv, parse_refractive_csv, write_growth_csv
from matchain.disjunctive_milp import build_extended_formulation
from matchain.errors import DataFormatError
from matchain.formulation_export import export_formulation, import_formulation
from matchain.output_writer import render_report, round_sig, write_matrices, write_table
from matchain.run import EXIT_ERROR, EXIT_LIMIT, EXIT_OK, EXIT_USAGE, run_cli
from matchain.thinfilm import build_thinfilm_formulation
from matchain.timemachine import atm_problem, gen_synthetic
from matchain.validators import validate_formulation_json


def write_csv(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestRefractiveCsv:
    def test_bundled_data(self, refractive_csv):
        libraries = parse_refractive_csv(refractive_csv, substrate="Tungsten")
        assert sorted(libraries) == [450.0, 600.0, 750.0, 900.0, 1200.0, 1500.0, 1800.0, 2100.0, 2400.0]
        lib = libraries[450.0]
        assert lib.substrate_name == "Tungsten"
        assert sorted(lib.materials) == ["Al2O3", "MgF2", "SiO2", "TiO2"]
        assert lib.substrate_index.imag > 0

    def test_role_column_picks_the_substrate(self, tmp_path):
        path = write_csv(tmp_path / "n.csv",
                         "material_name,wavelength_nm,n_real,n_imag,role\n"
                         "Gold,500,0.97,1.87,substrate\n"
                         "ZnS,500,2.42,0,coating\n"
                         "MgF2,500,1.38,0,coating\n")
        lib = parse_refractive_csv(path)[500.0]
        assert lib.substrate_name == "Gold"
        assert lib.materials == ["ZnS", "MgF2"]

    def test_ambiguous_substrate(self, refractive_csv):
        with pytest.raises(DataFormatError):
            parse_refractive_csv(refractive_csv)

    def test_unknown_substrate(self, refractive_csv):
        with pytest.raises(DataFormatError):
            parse_refractive_csv(refractive_csv, substrate="Platinum")

    def test_missing_wavelength(self, tungsten_libraries):
        with pytest.raises(DataFormatError, match="not in data"):
            library_at(tungsten_libraries, 455.0)

    def test_duplicate_material(self, tmp_path):
        path = write_csv(tmp_path / "n.csv",
                         "material_name,wavelength_nm,n_real,n_imag\n"
                         "W,450,3.3,2.5\nTiO2,450,2.4,0\nTiO2,450,2.5,0\n")
        with pytest.raises(DataFormatError, match="duplicate"):
            parse_refractive_csv(path, substrate="W")

    def test_bad_number(self, tmp_path):
        path = write_csv(tmp_path / "n.csv", "material_name,wavelength_nm,n_real\nW,450,abc\n")
        with pytest.raises(DataFormatError, match="not a number"):
            parse_refractive_csv(path, substrate="W")

    def test_header_only_and_missing_file(self, tmp_path):
        path = write_csv(tmp_path / "n.csv", "material_name,wavelength_nm,n_real,n_imag\n")
        with pytest.raises(DataFormatError):
            parse_refractive_csv(path)
        with pytest.raises(FileNotFoundError):
            parse_refractive_csv(str(tmp_path / "absent.csv"))


class TestGrowthCsv:
    def test_write_then_parse(self, tmp_path):
        growth = gen_synthetic(3, 4, seed=5)
        path = write_growth_csv(growth, str(tmp_path / "growth.csv"))
        parsed = parse_growth_csv(path)
        assert parsed.drugs == growth.drugs
        assert np.array_equal(parsed.rates, growth.rates)

    def test_genotype_column_is_little_endian(self, tmp_path):
        path = write_csv(tmp_path / "g.csv",
                         "drug_name,genotype,growth_rate\n"
                         "AMP,00,1.0\nAMP,10,2.0\nAMP,01,3.0\nAMP,11,4.0\n")
        assert parse_growth_csv(path).rates.tolist() == [[1.0, 2.0, 3.0, 4.0]]

    def test_missing_cell(self, tmp_path):
        path = write_csv(tmp_path / "g.csv", "drug_name,genotype,growth_rate\nAMP,00,1\nAMP,10,2\nAMP,01,3\n")
        with pytest.raises(DataFormatError, match="missing growth rate"):
            parse_growth_csv(path)

    def test_empty_rate(self, tmp_path):
        path = write_csv(tmp_path / "g.csv", "drug_name,genotype,growth_rate\nAMP,0,1\nAMP,1,\n")
        with pytest.raises(DataFormatError):
            parse_growth_csv(path)

    def test_duplicate_and_length_mismatch(self, tmp_path):
        dup = write_csv(tmp_path / "d.csv", "drug_name,genotype,growth_rate\nAMP,0,1\nAMP,0,2\nAMP,1,1\n")
        with pytest.raises(DataFormatError, match="duplicate"):
            parse_growth_csv(dup)
        short = write_csv(tmp_path / "s.csv", "drug_name,genotype,growth_rate\nAMP,00,1\nAMP,1,2\n")
        with pytest.raises(DataFormatError, match="length"):
            parse_growth_csv(short)


class TestFormulationJson:
    def test_milp_export_reloads_identically(self, figure, tmp_path):
        _, family = figure
        formulation = build_extended_formulation(atm_problem(family, "111", "000", 3))
        path = export_formulation(formulation, str(tmp_path / "atm.json"))
        data = json.loads((tmp_path / "atm.json").read_text())
        assert data["format"] == "matchain-formulation"
        assert data["kind"] == "milp"
        assert validate_formulation_json(data) == (True, [])
        assert import_formulation(path) == formulation.model

    def test_bilinear_export_needs_miqcqp(self, tungsten_450, tmp_path):
        model = build_thinfilm_formulation(tungsten_450, 2)
        with pytest.raises(ValueError):
            export_formulation(model, str(tmp_path / "film.json"), kind="milp")
        path = export_formulation(model, str(tmp_path / "film.json"), kind="miqcqp")
        reloaded = import_formulation(path)
        assert reloaded.n_vars == model.n_vars
        assert len(reloaded.quadratic_constraints) == len(model.quadratic_constraints)
        assert not reloaded.is_linear()

    def test_validator_reports_every_problem(self):
        bad = {
            "format": "matchain-formulation",
            "kind": "milp",
            "variables": [{"name": "x", "kind": "binary", "lower": 0, "upper": 1},
                          {"name": "x", "kind": "integer", "lower": "0", "upper": 1}],
            "linear_constraints": [{"terms": [{"var": "y", "coef": 1}], "sense": "<", "rhs": 1}],
            "objective": {"sense": "max", "terms": [], "bilinear": [{"var1": "x", "var2": "x", "coef": 1}]},
        }
        ok, errors = validate_formulation_json(bad)
        assert not ok
        joined = " | ".join(errors)
        for fragment in ("duplicate variable", "invalid kind", "bounds", "undeclared variable 'y'",
                         "invalid sense", "cannot carry bilinear"):
            assert fragment in joined

    def test_import_rejects_bad_files(self, tmp_path):
        broken = tmp_path / "broken.json"
        broken.write_text("{not json")
        with pytest.raises(DataFormatError):
            import_formulation(str(broken))
        wrong = tmp_path / "wrong.json"
        wrong.write_text(json.dumps({"format": "other", "variables": []}))
        with pytest.raises(DataFormatError):
            import_formulation(str(wrong))
        with pytest.raises(FileNotFoundError):
            import_formulation(str(tmp_path / "absent.json"))


class TestReports:
    def test_rounding(self):
        out = round_sig({"a": 1 / 3, "b": [np.float64(2 / 3), np.int64(4)], "c": float("inf"), "d": True})
        assert out == {"a": 0.333333333333, "b": [0.666666666667, 4], "c": "inf", "d": True}

    def test_timestamp_flag(self):
        assert "timestamp" not in json.loads(render_report({"x": 1}, timestamp=False))
        assert "timestamp" in json.loads(render_report({"x": 1}))

    def test_csv_and_xlsx_tables(self, tmp_path):
        rows = [{"layer": 1, "material": "TiO2", "thickness_nm": 47.1}, {"layer": 2, "material": "MgF2",
                                                                         "thickness_nm": 81.5}]
        csv_path = write_table(rows, str(tmp_path / "t.csv"))
        assert pd.read_csv(csv_path)["material"].tolist() == ["TiO2", "MgF2"]
        xlsx_path = write_table(rows, str(tmp_path / "out" / "t.xlsx"))
        df = pd.read_excel(xlsx_path, engine="openpyxl")
        assert df["thickness_nm"].tolist() == [47.1, 81.5]

    def test_matrix_files(self, figure, tmp_path):
        space, family = figure
        names = [space.label(j) for j in range(space.d)]
        paths = write_matrices(family.matrices, family.labels, names, str(tmp_path))
        assert [p.rsplit("/", 1)[-1] for p in paths] == ["T_Blue.csv", "T_Red.csv"]
        blue = pd.read_csv(paths[0], dtype=str).set_index("from\\to")
        assert float(blue.loc["111", "110"]) == pytest.approx(0.5)


class TestCommandLine:
    FILM = ["--substrate", "Tungsten", "--lambda", "450", "--materials", "TiO2,MgF2", "--no-timestamp"]

    def run_json(self, capsys, argv):
        code = run_cli(argv)
        return code, json.loads(capsys.readouterr().out) if code in (EXIT_OK, EXIT_LIMIT) else None

    def test_heuristic(self, capsys):
        code, report = self.run_json(capsys, ["thinfilm", "heuristic", "--layers", "2", *self.FILM])
        assert code == EXIT_OK
        assert report["reflectance"] == pytest.approx(0.865, abs=0.02)
        assert report["bare_reflectance"] == pytest.approx(0.470, abs=0.02)
        assert [row["layers"] for row in report["table"]] == [0, 1, 2]
        assert "timestamp" not in report

    def test_no_timestamp_is_byte_identical(self, capsys):
        argv = ["thinfilm", "solve", "--layers", "1", *self.FILM]
        assert run_cli(argv) == EXIT_OK
        first = capsys.readouterr().out
        assert run_cli(argv) == EXIT_OK
        assert capsys.readouterr().out == first
        assert "wall_time" not in json.loads(first)

    def test_solve_writes_the_stack_table(self, capsys, tmp_path):
        out = tmp_path / "stack.xlsx"
        code, report = self.run_json(capsys, ["thinfilm", "solve", "--layers", "1", "--out", str(out), *self.FILM])
        assert code == EXIT_OK
        assert report["status"] == "optimal"
        assert report["optimal_value"] == pytest.approx(0.553, abs=2e-3)
        assert pd.read_excel(out, engine="openpyxl")["material"].tolist() == ["TiO2"]

    def test_node_limit_exit_code(self, capsys):
        code, report = self.run_json(capsys, ["thinfilm", "solve", "--layers", "3", "--node-limit", "1",
                                              "--gap", "0", *self.FILM])
        assert code == EXIT_LIMIT
        assert report["status"] == "node_limit"
        assert report["upper_bound"] >= report["optimal_value"]

    def test_film_export(self, capsys, tmp_path):
        out = tmp_path / "film.json"
        code, report = self.run_json(capsys, ["thinfilm", "export", "--layers", "2", "--out", str(out), *self.FILM])
        assert code == EXIT_OK
        assert report["kind"] == "miqcqp"
        assert import_formulation(str(out)).n_vars == report["variables"]

    def test_atm_synthetic_solve_and_enumerate_agree(self, capsys):
        data = ["--alleles", "3", "--drugs", "3", "--seed", "4", "--initial", "111", "--steps", "3",
                "--no-timestamp"]
        code, solved = self.run_json(capsys, ["atm", "solve", "--gap", "0", *data])
        assert code == EXIT_OK
        code, enumerated = self.run_json(capsys, ["atm", "enumerate", *data])
        assert code == EXIT_OK
        assert solved["target"] == "000"
        assert solved["optimal_value"] == pytest.approx(enumerated["optimal_value"], abs=1e-9)
        assert len(solved["optimal_sequence"]) == 3
        assert all(name.startswith("drug") for name in solved["optimal_sequence"])

    def test_atm_gen_then_solve_from_csv(self, capsys, tmp_path):
        out = tmp_path / "growth.csv"
        code, _ = self.run_json(capsys, ["atm", "gen", "--alleles", "3", "--drugs", "2", "--seed", "8",
                                         "--out", str(out), "--no-timestamp"])
        assert code == EXIT_OK
        plan = ["--initial", "110", "--steps", "2", "--model", "epm", "--no-timestamp"]
        _, from_csv = self.run_json(capsys, ["atm", "enumerate", "--growth", str(out), *plan])
        _, synthetic = self.run_json(capsys, ["atm", "enumerate", "--alleles", "3", "--drugs", "2",
                                              "--seed", "8", *plan])
        assert from_csv["optimal_value"] == synthetic["optimal_value"]

    def test_atm_build_writes_one_file_per_drug(self, capsys, tmp_path):
        code, report = self.run_json(capsys, ["atm", "build", "--alleles", "2", "--drugs", "3", "--seed", "1",
                                              "--mode", "absorb", "--out", str(tmp_path), "--no-timestamp"])
        assert code == EXIT_OK
        assert len(report["out"]) == 3
        assert all(rows == [] for rows in report["empty_rows"].values())

    def test_atm_export(self, capsys, tmp_path):
        out = tmp_path / "atm.json"
        code, report = self.run_json(capsys, ["atm", "export", "--alleles", "2", "--drugs", "2", "--seed", "1",
                                              "--initial", "11", "--steps", "2", "--out", str(out),
                                              "--no-timestamp"])
        assert code == EXIT_OK
        assert report["box_kind"] == "simplex"
        assert import_formulation(str(out)).is_linear()

    @pytest.mark.parametrize("argv", [
        ["thinfilm", "solve", "--substrate", "Tungsten", "--lambda", "450"],
        ["optics", "solve"],
        ["atm", "solve", "--initial", "11", "--steps", "2"],
        ["atm", "solve", "--alleles", "2", "--drugs", "2", "--initial", "11", "--steps", "2", "--bound", "mip"],
    ])
    def test_usage_errors(self, capsys, argv):
        assert run_cli(argv) == EXIT_USAGE
        assert "growth_rate" in capsys.readouterr().err

    def test_data_errors(self, capsys, tmp_path):
        assert run_cli(["thinfilm", "heuristic", "--layers", "1", "--data", str(tmp_path / "none.csv"),
                        *self.FILM]) == EXIT_ERROR
        assert run_cli(["thinfilm", "heuristic", "--layers", "1", "--substrate", "Tungsten",
                        "--lambda", "455"]) == EXIT_ERROR
        assert run_cli(["atm", "enumerate", "--alleles", "2", "--drugs", "4", "--seed", "1", "--initial", "11",
                        "--steps", "6", "--budget", "100"]) == EXIT_ERROR
        assert "❌" in capsys.readouterr().err
