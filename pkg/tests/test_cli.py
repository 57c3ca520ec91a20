import pytest

from beamtree.cli import main
from beamtree.listops import read_tsv


def test_gen_data_train_eval_parse_pipeline(tmp_path, capsys):
    data = tmp_path / "data"
    main(["gen-data", "--kind", "length_gen", "--out", str(data),
          "--seed", "3", "--train-count", "24", "--dev-count", "8",
          "--test-count", "8", "--train-max-len", "25",
          "--train-max-depth", "3"])
    out = capsys.readouterr().out
    assert "train" in out and "test" in out
    assert len(read_tsv(data / "train.tsv")) == 24

    run = tmp_path / "run"
    main(["train", "--out", str(run), "--seed", "1",
          "--encoder=bt", "--beam_size=2", "--d_e=10", "--d_h=10",
          "--max_epochs=1", "--dropout=0.0",
          f"--data_dir={data}"])
    out = capsys.readouterr().out
    assert "checkpoint:" in out
    ckpt = run / "best.ckpt"
    config = run / "config.txt"
    assert ckpt.exists()

    main(["eval", "--config", str(config), "--checkpoint", str(ckpt),
          "--split", str(data / "dev.tsv")])
    out = capsys.readouterr().out
    assert out.startswith("accuracy:")

    main(["parse", "--config", str(config), "--checkpoint", str(ckpt),
          "--input", "[MAX 2 [MIN 8 3 ] 1 ]"])
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines
    total = 0.0
    for line in lines:
        prob, tree = line.split("\t")
        total += float(prob)
        assert tree.count("(") == 7  # n-1 internal nodes for 8 tokens
    assert total == pytest.approx(1.0, abs=0.01)


def test_gradcheck_command_passes(capsys):
    main(["gradcheck", "--seed", "1"])
    out = capsys.readouterr().out
    assert "gradcheck passed" in out
    for name in ("grc+scorer", "tree_lstm", "leaf_transform",
                 "end_to_end_bt_onesoft"):
        assert name in out


def test_train_rejects_malformed_override(tmp_path):
    with pytest.raises(SystemExit):
        main(["train", "--out", str(tmp_path), "encoder=bt"])
