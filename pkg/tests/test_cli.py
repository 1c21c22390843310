import csv
import json

from racapnet.cli import main
from racapnet.config import TrainConfig
from racapnet.data import SynthSpec


def test_generate_train_eval_inspect(tmp_path, capsys):
    spec = SynthSpec(n_relations=3, n_bags=40, sentences_per_bag=(1, 2), test_fraction=0.25, na_rate=0.2, max_sentence_len=10)
    (tmp_path / "spec.json").write_text(json.dumps(spec.to_dict()))
    TrainConfig.tiny(epochs=2).to_json(tmp_path / "cfg.json")
    corpus, run = tmp_path / "corpus", tmp_path / "run"

    assert main(["generate", "--spec", str(tmp_path / "spec.json"), "--out", str(corpus)]) == 0
    assert {"train.txt", "test.txt", "relations.json"} <= {p.name for p in corpus.iterdir()}

    assert main(["train", "--config", str(tmp_path / "cfg.json"), "--data", str(corpus), "--out", str(run)]) == 0
    assert len((run / "metrics.jsonl").read_text().splitlines()) == 2
    assert (run / "model.ckpt").exists()

    pr, summary = tmp_path / "pr.csv", tmp_path / "summary.json"
    args = ["eval", "--model", str(run / "model.ckpt"), "--data", str(corpus), "--pr", str(pr), "--summary", str(summary)]
    assert main(args) == 0
    rows = list(csv.reader(open(pr)))
    assert rows[0] == ["precision", "recall"] and len(rows) > 1
    assert 0.0 <= json.loads(summary.read_text())["auc"] <= 1.0

    dumps = tmp_path / "dumps"
    assert main(["inspect", "--model", str(run / "model.ckpt"), "--data", str(corpus), "--out", str(dumps), "--limit", "3"]) == 0
    att = [json.loads(l) for l in (dumps / "attention.jsonl").read_text().splitlines()]
    cpl = [json.loads(l) for l in (dumps / "coupling.jsonl").read_text().splitlines()]
    assert len(att) == len(cpl) == 3
    for a, c in zip(att, cpl):
        assert len(a["weights"]) == 4 and all(len(w) == len(a["tokens"]) for w in a["weights"])
        assert len(c["coupling"]) == 4 and all(abs(sum(row) - 1) < 1e-9 for row in c["coupling"])
        assert len(c["capsules"]) == 4 and c["capsules"][0] == "NA"


def test_unknown_config_key_exits_nonzero(tmp_path, capsys):
    (tmp_path / "cfg.json").write_text(json.dumps({"epochs": 1, "learning_rate": 3}))
    code = main(["gradcheck", "--config", str(tmp_path / "cfg.json")])
    assert code == 2
    assert "learning_rate" in capsys.readouterr().err


def test_gradcheck_exit_code(capsys):
    assert main(["gradcheck", "--length", "4"]) == 0
    assert "checks passed" in capsys.readouterr().out
