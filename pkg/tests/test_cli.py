import pytest
from PIL import Image

from retarget.cli import build_parser, run_cli
from retarget.config import TrainConfig
from retarget.imaging import save_image
from retarget.synthetic import toy_image

SUBCOMMANDS = ["prepare-data", "train", "retarget", "seam-carve", "evaluate", "grid"]


@pytest.fixture
def image_file(tmp_path, rng):
    image, seg = toy_image(rng, 96, 128)
    return save_image(image, tmp_path / "a.png")


def test_retarget_contract(image_file, small_ckpt, tmp_path):
    out = tmp_path / "b.png"
    code = run_cli(["retarget", "--in", str(image_file), "--out", str(out), "--width", "256", "--height", "384",
                    "--ckpt", str(small_ckpt), "--bbox", "30,20,50,40"])
    assert code == 0
    with Image.open(out) as im:
        assert im.size == (256, 384)


def test_retarget_object_placement_and_masks(image_file, small_ckpt, tmp_path):
    args = ["retarget", "--in", str(image_file), "--width", "200", "--height", "100", "--ckpt", str(small_ckpt),
            "--bbox", "30,20,50,40", "--object-left", "10", "--object-top", "5", "--object-width", "40",
            "--object-height", "30", "--dump-masks", str(tmp_path / "masks"), "--seed", "3"]
    assert run_cli(args + ["--out", str(tmp_path / "x.png")]) == 0
    assert run_cli(args + ["--out", str(tmp_path / "y.png")]) == 0
    assert (tmp_path / "x.png").read_bytes() == (tmp_path / "y.png").read_bytes()
    with Image.open(tmp_path / "masks" / "x_mask.png") as im:
        assert im.size == (200, 100)


def test_retarget_partial_object_flags(image_file, small_ckpt, tmp_path, capsys):
    code = run_cli(["retarget", "--in", str(image_file), "--out", str(tmp_path / "b.png"), "--width", "64",
                    "--height", "64", "--ckpt", str(small_ckpt), "--object-left", "3"])
    assert code == 1


def test_retarget_without_annotation(image_file, small_ckpt, tmp_path, capsys):
    code = run_cli(["retarget", "--in", str(image_file), "--out", str(tmp_path / "b.png"), "--width", "64",
                    "--height", "64", "--ckpt", str(small_ckpt)])
    err = capsys.readouterr().err
    assert code == 2 and err.startswith("ERROR:retarget_inference:") and "--bbox" in err


def test_unknown_flag(capsys):
    assert run_cli(["seam-carve", "--bogus"]) == 1
    assert "usage:" in capsys.readouterr().err


def test_missing_dataset_root(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(f"dataset_root = {tmp_path / 'nowhere'}\nout_dir = {tmp_path / 'out'}\n")
    assert run_cli(["train", "--config", str(cfg)]) == 2
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("ERROR:dataset_pipeline:")


def test_train_requires_some_root(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("epochs = 1\n")
    assert run_cli(["train", "--config", str(cfg)]) == 1


@pytest.mark.parametrize("sub", SUBCOMMANDS)
def test_help_lists_seed_and_defaults(sub, capsys):
    assert run_cli([sub, "--help"]) == 0
    text = capsys.readouterr().out
    assert "--seed" in text
    if sub == "train":
        for f in ("--lr-generator", "--batch-size", "--kappa", "--canvas"):
            assert f in text
        assert f"(default: {TrainConfig.lr_discriminator!r})" in text


def test_every_config_field_is_a_train_flag():
    from dataclasses import fields

    train = build_parser()._subparsers._group_actions[0].choices["train"]
    dests = {a.dest for a in train._actions}
    assert {f.name for f in fields(TrainConfig)} <= dests


def test_train_flags_override_config(toy_root, tmp_path):
    out = tmp_path / "out"
    code = run_cli(["train", "--data", str(toy_root), "--out-dir", str(out), "--canvas", "128", "--batch-size", "4",
                    "--base-width", "8", "--max-width", "16", "--n-residual", "1", "--disc-layers", "3",
                    "--disc-width", "8", "--max-steps", "1", "--deterministic", "yes"])
    assert code == 0
    assert (out / "latest.ckpt").is_file()
    assert "batch_size = 4" in (out / "config.cfg").read_text()
    assert len((out / "loss_log.tsv").read_text().splitlines()) == 2


def test_seam_carve(image_file, tmp_path):
    assert run_cli(["seam-carve", "--in", str(image_file), "--out", str(tmp_path / "s.png"),
                    "--width", "120", "--height", "90"]) == 0
    with Image.open(tmp_path / "s.png") as im:
        assert im.size == (120, 90)


def test_prepare_data(toy_root, tmp_path, capsys):
    assert run_cli(["prepare-data", "--data", str(toy_root), "--canvas", "128", "--dump", "2",
                    "--out", str(tmp_path / "pairs")]) == 0
    assert "samples\t8" in capsys.readouterr().out
    assert len(list((tmp_path / "pairs").glob("*_gt.png"))) == 2


def test_evaluate(toy_root, tmp_path):
    from retarget.train import init_state, save_checkpoint

    cfg = TrainConfig(canvas=128, base_width=8, max_width=16, n_residual=1, disc_layers=3, disc_width=8)
    ckpt = save_checkpoint(init_state(cfg), tmp_path / "m.ckpt")
    out = tmp_path / "r.tsv"
    assert run_cli(["evaluate", "--data", str(toy_root), "--canvas", "128", "--ckpt", str(ckpt), "--n", "2",
                    "--out", str(out), "--grids", str(tmp_path / "grids")]) == 0
    rows = [line.split("\t") for line in out.read_text().splitlines()]
    assert rows[0] == ["image", "method", "target_size", "psnr", "ssim", "nr_score", "scorer_id"]
    assert [r[1] for r in rows[1:4]] == ["resize", "seam-carve", "ours"]
    assert len(rows) == 7 and len(list((tmp_path / "grids").glob("*.png"))) == 2


def test_evaluate_canvas_mismatch(toy_root, small_ckpt, capsys):
    assert run_cli(["evaluate", "--data", str(toy_root), "--canvas", "128", "--ckpt", str(small_ckpt)]) == 2
    assert capsys.readouterr().err.startswith("ERROR:retarget_inference:")


def test_grid(image_file, tmp_path):
    assert run_cli(["grid", "--entry", f"a={image_file}", "--entry", f"b={image_file}", "--score",
                    "--out", str(tmp_path / "g.png")]) == 0
    with Image.open(tmp_path / "g.png") as im:
        assert im.size[0] > 2 * 128
    assert run_cli(["grid", "--entry", str(image_file), "--out", str(tmp_path / "h.png")]) == 1


def test_default_checkpoint_from_environment(image_file, small_ckpt, tmp_path, monkeypatch):
    import shutil

    shutil.copy(small_ckpt, tmp_path / "latest.ckpt")
    monkeypatch.setenv("RETARGET_CKPT_DIR", str(tmp_path))
    assert run_cli(["retarget", "--in", str(image_file), "--out", str(tmp_path / "o.png"), "--width", "64",
                    "--height", "48", "--bbox", "0,0,10,10"]) == 0


def test_unreadable_input(tmp_path, capsys):
    assert run_cli(["seam-carve", "--in", str(tmp_path / "none.png"), "--out", "y.png",
                    "--width", "4", "--height", "4"]) == 2
    assert capsys.readouterr().err.startswith("ERROR:seam_carving_baseline:")


def test_unexpected_exception_is_reported(image_file, tmp_path, monkeypatch, capsys):
    import retarget.seam

    def boom(*a, **k):
        raise ValueError("kaput")

    monkeypatch.setattr(retarget.seam, "seam_retarget", boom)
    assert run_cli(["seam-carve", "--in", str(image_file), "--out", str(tmp_path / "y.png"),
                    "--width", "4", "--height", "4"]) == 2
    assert capsys.readouterr().err.startswith("ERROR:cli:ValueError: kaput")
