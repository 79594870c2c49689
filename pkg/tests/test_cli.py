from __future__ import annotations

import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from espresso.cli import main
from espresso.corpus import save_catalog
from espresso.numerics import load_model
from espresso.service import build_state, create_app

from audio_fixtures import click_track, write_wav
from synthetic_world import write_pairs


@pytest.fixture(scope="module")
def trained(tmp_path_factory, world_dir):
    """A model trained through the CLI itself, shared by the query tests."""
    model_path = tmp_path_factory.mktemp("model") / "model.json"
    code = main(
        [
            "train",
            "--catalog", str(world_dir["catalog"]),
            "--pairs", str(world_dir["pairs"]),
            "--embeddings", str(world_dir["embeddings"]),
            "--out", str(model_path),
        ]
    )
    assert code == 0
    return model_path


def test_train_reports_summary(tmp_path, world_dir, capsys):
    model_path = tmp_path / "model.json"
    code = main(
        [
            "train",
            "--catalog", str(world_dir["catalog"]),
            "--pairs", str(world_dir["pairs"]),
            "--embeddings", str(world_dir["embeddings"]),
            "--augment", "pitchfork,musiccaps",
            "--out", str(model_path),
        ]
    )
    out = capsys.readouterr().out
    assert code == 0
    assert model_path.exists()
    assert "trained on 46 pairs" in out
    assert "fingerprint" in out


def test_train_pca_off_omits_pca_block(tmp_path, world_dir):
    model_path = tmp_path / "model.json"
    code = main(
        [
            "train",
            "--catalog", str(world_dir["catalog"]),
            "--pairs", str(world_dir["pairs"]),
            "--embeddings", str(world_dir["embeddings"]),
            "--pca", "off",
            "--out", str(model_path),
        ]
    )
    assert code == 0
    doc = json.loads(model_path.read_text())
    assert "pca" not in doc
    assert doc["map"]["ridge_lambda"] > 0  # 30 pairs vs 50 dims


def test_train_pca_cap_on_tiny_pair_set(tmp_path, world_dir, world_with_aux):
    pairs_path = tmp_path / "pairs.json"
    write_pairs(world_with_aux.pairs[:3], pairs_path)
    model_path = tmp_path / "model.json"
    code = main(
        [
            "train",
            "--catalog", str(world_dir["catalog"]),
            "--pairs", str(pairs_path),
            "--embeddings", str(world_dir["embeddings"]),
            "--pca", "0.95",
            "--out", str(model_path),
        ]
    )
    assert code == 0
    doc = json.loads(model_path.read_text())
    # Three samples span at most two centered directions.
    assert len(doc["pca"]["components"]) <= 2


def test_train_raw_feature_space_flag(tmp_path, world_dir):
    model_path = tmp_path / "model.json"
    code = main(
        [
            "train",
            "--catalog", str(world_dir["catalog"]),
            "--pairs", str(world_dir["pairs"]),
            "--embeddings", str(world_dir["embeddings"]),
            "--raw-feature-space",
            "--out", str(model_path),
        ]
    )
    assert code == 0
    assert "feature_standardization" not in json.loads(model_path.read_text())


def test_query_table_output(world_dir, trained, capsys, world_with_aux):
    text = world_with_aux.pairs[0].text
    code = main(
        [
            "query",
            "--model", str(trained),
            "--catalog", str(world_dir["catalog"]),
            "--embeddings", str(world_dir["embeddings"]),
            "--piece", "piece_a",
            "--text", text,
        ]
    )
    captured = capsys.readouterr()
    assert code == 0
    lines = captured.out.strip().split("\n")
    assert lines[0].split() == ["rank", "score", "performance", "artist"]
    assert len(lines) == 1 + 5
    assert lines[1].split()[0] == "1"


def test_query_document_matches_service_response(
    world_dir, trained, capsys, world_with_aux
):
    text = world_with_aux.pairs[7].text
    piece = world_with_aux.pairs[7].piece_id
    code = main(
        [
            "query",
            "--model", str(trained),
            "--catalog", str(world_dir["catalog"]),
            "--embeddings", str(world_dir["embeddings"]),
            "--piece", piece,
            "--text", text,
            "--format", "document",
        ]
    )
    assert code == 0
    document = json.loads(capsys.readouterr().out)

    state = build_state(
        world_dir["catalog"], trained, world_dir["embeddings"], version="x"
    )
    response = TestClient(create_app(state)).post(
        "/query", json={"piece_id": piece, "text": text}
    )
    assert response.status_code == 200
    assert document == response.json()


def test_query_warns_about_oov_tokens(world_dir, trained, capsys):
    code = main(
        [
            "query",
            "--model", str(trained),
            "--catalog", str(world_dir["catalog"]),
            "--embeddings", str(world_dir["embeddings"]),
            "--piece", "piece_a",
            "--text", "aa zzz",
        ]
    )
    captured = capsys.readouterr()
    assert code == 0
    assert "zzz" in captured.err
    assert "zzz" not in captured.out


def test_query_unknown_piece_fails(world_dir, trained, capsys):
    code = main(
        [
            "query",
            "--model", str(trained),
            "--catalog", str(world_dir["catalog"]),
            "--embeddings", str(world_dir["embeddings"]),
            "--piece", "ghost",
            "--text", "aa",
        ]
    )
    captured = capsys.readouterr()
    assert code == 1
    assert "ghost" in captured.err


def test_query_all_oov_fails(world_dir, trained, capsys):
    code = main(
        [
            "query",
            "--model", str(trained),
            "--catalog", str(world_dir["catalog"]),
            "--embeddings", str(world_dir["embeddings"]),
            "--piece", "piece_a",
            "--text", "zzz qqq",
        ]
    )
    captured = capsys.readouterr()
    assert code == 1
    assert "error:" in captured.err


def test_evaluate_single_run(world_dir, capsys):
    code = main(
        [
            "evaluate",
            "--catalog", str(world_dir["catalog"]),
            "--pairs", str(world_dir["pairs"]),
            "--embeddings", str(world_dir["embeddings"]),
            "--pca", "0.95",
            "--trials", "2000",
        ]
    )
    captured = capsys.readouterr()
    assert code == 0
    assert "top1" in captured.out
    assert "random baseline" in captured.out


def test_evaluate_grid_table_has_eight_rows(world_dir, capsys):
    code = main(
        [
            "evaluate",
            "--catalog", str(world_dir["catalog"]),
            "--pairs", str(world_dir["pairs"]),
            "--embeddings", str(world_dir["embeddings"]),
            "--grid",
            "--table2",
            "--trials", "2000",
        ]
    )
    captured = capsys.readouterr()
    assert code == 0
    lines = captured.out.strip().split("\n")
    header_index = next(i for i, l in enumerate(lines) if "Pitchfork" in l)
    rows = [
        l for l in lines[header_index + 2 :] if ("✓" in l or "✗" in l)
    ]
    assert len(rows) == 8


def test_evaluate_reports_are_byte_identical_across_runs(
    world_dir, tmp_path, capsys
):
    outputs = []
    for prefix in ("one", "two"):
        code = main(
            [
                "evaluate",
                "--catalog", str(world_dir["catalog"]),
                "--pairs", str(world_dir["pairs"]),
                "--embeddings", str(world_dir["embeddings"]),
                "--grid",
                "--seed", "7",
                "--trials", "500",
                "--out", str(tmp_path / prefix),
            ]
        )
        assert code == 0
        outputs.append(
            (
                (tmp_path / f"{prefix}.json").read_bytes(),
                (tmp_path / f"{prefix}.csv").read_bytes(),
            )
        )
    capsys.readouterr()
    assert outputs[0] == outputs[1]


def test_evaluate_csv_has_config_columns(world_dir, tmp_path, capsys):
    code = main(
        [
            "evaluate",
            "--catalog", str(world_dir["catalog"]),
            "--pairs", str(world_dir["pairs"]),
            "--embeddings", str(world_dir["embeddings"]),
            "--seed", "11",
            "--trials", "500",
            "--out", str(tmp_path / "single"),
        ]
    )
    capsys.readouterr()
    assert code == 0
    lines = (tmp_path / "single.csv").read_text().strip().split("\n")
    assert lines[0].startswith("augment_pitchfork,augment_musiccaps,pca,")
    assert len(lines) == 2
    assert ",11," in lines[1]


def test_onsets_single_file(tmp_path, capsys):
    path = write_wav(tmp_path, click_track(clicks_per_second=4.0))
    code = main(["onsets", "--audio", str(path)])
    captured = capsys.readouterr()
    assert code == 0
    assert abs(float(captured.out.strip()) - 4.0) <= 0.2


def test_onsets_short_clip_fails_cleanly(tmp_path, capsys):
    path = write_wav(tmp_path, np.zeros(22050))
    code = main(["onsets", "--audio", str(path)])
    captured = capsys.readouterr()
    assert code == 1
    assert "too short" in captured.err


def test_onsets_batch_writes_patch(tmp_path, world_with_aux, capsys):
    audio_dir = tmp_path / "audio"
    audio_dir.mkdir()
    write_wav(audio_dir, click_track(clicks_per_second=4.0), name="v0.wav")
    write_wav(audio_dir, click_track(clicks_per_second=2.0), name="v1.wav")

    catalog = world_with_aux.catalog
    from espresso.corpus import Catalog, Performance, Piece

    piece = catalog.pieces[0]
    kept = ("piece_a_v0", "piece_a_v1")
    performances = tuple(
        Performance(
            p.performance_id,
            p.piece_id,
            p.artist_label,
            p.features,
            audio_path=f"audio/{'v0' if p.performance_id.endswith('v0') else 'v1'}.wav",
        )
        for p in catalog.performances
        if p.performance_id in kept
    )
    small = Catalog(
        pieces=(Piece(piece.piece_id, piece.title, kept),),
        performances=performances,
    )
    catalog_path = tmp_path / "catalog.json"
    save_catalog(small, catalog_path)

    patch_path = tmp_path / "patch.json"
    code = main(
        [
            "onsets",
            "--catalog", str(catalog_path),
            "--patch-out", str(patch_path),
        ]
    )
    captured = capsys.readouterr()
    assert code == 0
    assert "2 performances" in captured.out
    patch = json.loads(patch_path.read_text())
    assert patch["schema_version"] == 1
    assert abs(patch["entries"]["piece_a_v0"] - 4.0) <= 0.2
    assert abs(patch["entries"]["piece_a_v1"] - 2.0) <= 0.2


def test_onsets_batch_requires_patch_out(world_dir, capsys):
    with pytest.raises(SystemExit) as err:
        main(["onsets", "--catalog", str(world_dir["catalog"])])
    assert err.value.code == 2
    capsys.readouterr()


def test_usage_errors_exit_two(tmp_path, capsys):
    with pytest.raises(SystemExit) as err:
        main([])
    assert err.value.code == 2

    target = tmp_path / "model.json"
    with pytest.raises(SystemExit) as err:
        main(
            [
                "train",
                "--catalog", "c.json",
                "--pairs", "p.json",
                "--embeddings", "e.txt",
                "--pca", "-1",
                "--out", str(target),
            ]
        )
    assert err.value.code == 2
    # Usage errors are raised before anything touches the filesystem.
    assert not target.exists()
    capsys.readouterr()


def test_serve_requires_paths(monkeypatch, capsys):
    for name in ("ESPRESSO_CATALOG", "ESPRESSO_MODEL", "ESPRESSO_EMBEDDINGS"):
        monkeypatch.delenv(name, raising=False)
    with pytest.raises(SystemExit) as err:
        main(["serve"])
    assert err.value.code == 2
    capsys.readouterr()


def test_serve_reads_environment(monkeypatch, world_dir, trained):
    calls = {}

    def fake_run_service(catalog, model, embeddings, port, version):
        calls.update(
            catalog=catalog, model=model, embeddings=embeddings, port=port
        )

    import espresso.service as service_module

    monkeypatch.setattr(service_module, "run_service", fake_run_service)
    monkeypatch.setenv("ESPRESSO_PORT", "5555")
    monkeypatch.setenv("ESPRESSO_CATALOG", str(world_dir["catalog"]))
    monkeypatch.setenv("ESPRESSO_MODEL", str(trained))
    monkeypatch.setenv("ESPRESSO_EMBEDDINGS", str(world_dir["embeddings"]))
    code = main(["serve"])
    assert code == 0
    assert calls["port"] == 5555
    assert calls["catalog"] == str(world_dir["catalog"])
