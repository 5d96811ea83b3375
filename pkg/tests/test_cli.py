import json
import subprocess
import sys
import time

import pytest

from mmg2p import synthlang
from mmg2p.cli import EXIT_DATA, EXIT_MODEL, EXIT_OK, EXIT_USAGE, main
from mmg2p.experiment import build_system
from mmg2p.manifest import Manifest, ManifestError, format_kv, parse_kv

from conftest import TINY_SPEC
from test_pipeline import FixedEzafe

STEPS = ["--set", "oov.steps=8", "--set", "homograph.steps=4", "--set", "ezafe-i.steps=4",
         "--set", "ezafe-ii.steps=4"]


def _spec_file(tmp_path):
    path = tmp_path / "spec.txt"
    values = {k: getattr(TINY_SPEC, k) for k in TINY_SPEC.__dataclass_fields__ if k != "rules"}
    path.write_text(format_kv(values), encoding="utf-8")
    return path


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """A synthesised corpus with every pipeline module trained for a few steps."""
    root = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--spec", str(_spec_file(root)), "--out", str(root / "data")]) == 0
    manifest = root / "data" / "manifest.txt"
    for module in ("oov", "homograph", "ezafe-i", "ezafe-ii"):
        assert main(["train", module, "--manifest", str(manifest), *STEPS]) == EXIT_OK
    return root / "data"


def test_synth_writes_manifest(workdir):
    values = parse_kv((workdir / "manifest.txt").read_text("utf-8"))
    assert values["seed"] == str(TINY_SPEC.seed)
    m = Manifest.load(workdir / "manifest.txt")
    assert m.path("lexicon").exists() and m.ezafe_model == "I"


def test_train_writes_checkpoint_and_curve(workdir):
    ckpt = workdir / "checkpoints" / "oov.ckpt"
    assert ckpt.exists()
    curve = json.loads((workdir / "checkpoints" / "oov.log.json").read_text("utf-8"))
    assert curve["module"] == "oov" and curve["losses"]


def test_convert_dictionary_sentence(workdir, tmp_path, capsys):
    lang = synthlang.build_language(TINY_SPEC)
    out = synthlang.generate(TINY_SPEC)
    listed = [w for w in sorted(lang.vocab)
              if w not in lang.readings and w not in out.unlisted][:4]
    src = tmp_path / "in.txt"
    src.write_text(" ".join(listed) + "\n", encoding="utf-8")
    dest = tmp_path / "out.tsv"
    code = main(["convert", "--manifest", str(workdir / "manifest.txt"), "--input", str(src),
                 "--output", str(dest)])
    assert code == EXIT_OK
    rows = [line.split("\t") for line in dest.read_text("utf-8").splitlines() if line]
    assert [r[0] for r in rows] == listed
    assert [r[2] for r in rows] == ["dict"] * 4
    err = capsys.readouterr().err
    assert "# convert" in err and "seed = " in err and "throughput" in err


def test_convert_workers_keep_order(workdir, tmp_path):
    lines = [s.split("\t")[0] for s in (workdir / "corpus.tsv").read_text("utf-8").splitlines()[:12]]
    src = tmp_path / "in.txt"
    src.write_text("\n".join(lines) + "\nqqzzq\n", encoding="utf-8")
    outs = []
    for extra in ([], ["--workers", "3"], ["--parallel"]):
        dest = tmp_path / f"out{len(outs)}.tsv"
        assert main(["convert", "--manifest", str(workdir / "manifest.txt"), "--input",
                     str(src), "--output", str(dest), "--set", "oov_log=", *extra]) == EXIT_OK
        outs.append(dest.read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_convert_logs_oov(workdir, tmp_path):
    src = tmp_path / "in.txt"
    src.write_text("qqzzq qqzzq\nqqzzq\n", encoding="utf-8")
    log = tmp_path / "oov.tsv"
    assert main(["convert", "--manifest", str(workdir / "manifest.txt"), "--input", str(src),
                 "--output", str(tmp_path / "o.tsv"), "--set", f"oov_log={log}"]) == EXIT_OK
    (row,) = log.read_text("utf-8").splitlines()
    assert row.startswith("qqzzq\t") and row.endswith("\t3")


def test_eval_report(workdir, tmp_path):
    report = tmp_path / "r.jsonl"
    rows = tmp_path / "rows.tsv"
    assert main(["eval", "--manifest", str(workdir / "manifest.txt"), "--report", str(report),
                 "--rows", str(rows)]) == EXIT_OK
    summary = json.loads(report.read_text("utf-8").splitlines()[-1])
    for key in ("word_accuracy", "ezafe", "homograph_accuracy", "homograph_score"):
        assert key in summary
    assert summary["words"] == len(rows.read_text("utf-8").splitlines())


def test_train_and_eval_are_deterministic(tmp_path):
    reports = []
    for run in ("a", "b"):
        data = tmp_path / run
        assert main(["synth", "--spec", str(_spec_file(tmp_path)), "--out", str(data)]) == 0
        manifest = str(data / "manifest.txt")
        for module in ("oov", "homograph", "ezafe-i"):
            assert main(["train", module, "--manifest", manifest, *STEPS]) == EXIT_OK
        assert main(["eval", "--manifest", manifest, "--report", str(data / "r.jsonl")]) == 0
        reports.append(data)
    a, b = reports
    for name in ("oov.ckpt", "homograph.ckpt", "ezafe-i.ckpt", "oov.log.json"):
        assert (a / "checkpoints" / name).read_bytes() == (b / "checkpoints" / name).read_bytes()
    assert (a / "r.jsonl").read_bytes() == (b / "r.jsonl").read_bytes()


def test_exit_codes(workdir, tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as info:
        main(["train", "nonsense", "--manifest", "x"])
    assert info.value.code == EXIT_USAGE
    assert main(["eval", "--manifest", str(tmp_path / "missing.txt")]) == EXIT_DATA
    # a manifest without a seed cannot train
    text = (workdir / "manifest.txt").read_text("utf-8")
    bare = workdir / "noseed.txt"
    bare.write_text("".join(l + "\n" for l in text.splitlines() if not l.startswith("seed")),
                    encoding="utf-8")
    assert main(["train", "oov", "--manifest", str(bare)]) == EXIT_USAGE
    assert main(["convert", "--manifest", str(workdir / "manifest.txt"), "--set",
                 f"checkpoints={tmp_path}", "--input", str(bare)]) == EXIT_MODEL
    bad = tmp_path / "bad.txt"
    bad.write_text("alphabet = nope.tsv\nlexicon = x\ncorpus = y\n", encoding="utf-8")
    assert main(["eval", "--manifest", str(bad)]) == EXIT_DATA


def test_manifest_validation(workdir):
    with pytest.raises(ManifestError, match="unknown"):
        Manifest.load(workdir / "manifest.txt", ["colour=red"])
    with pytest.raises(ManifestError, match="ezafe_model"):
        Manifest.load(workdir / "manifest.txt", ["ezafe_model=III"])
    m = Manifest.load(workdir / "manifest.txt", ["oov.steps=3", "seed=9"])
    assert m.overrides("oov") == {"steps": "3"} and m.seed == 9


def test_gradcheck_command(capsys):
    assert main(["gradcheck", "--shapes", "2"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines and all(line.startswith("PASS") for line in lines)


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "mmg2p.cli"], capture_output=True, text=True)
    assert proc.returncode == EXIT_USAGE
    assert "usage" in proc.stderr


def test_dictionary_route_is_much_faster(tiny_data, tiny_models, tiny_synth):
    system = build_system(tiny_data, tiny_models["oov"], tiny_models["homograph"],
                          FixedEzafe(tiny_data.alphabet))
    dict_words = sorted(tiny_data.dicts.pron)[:20]
    oov_words = synthlang.novel_words(tiny_synth.language, 20, seed=0)
    start = time.perf_counter()
    for _ in range(20):
        system.convert_words(dict_words)
    per_dict = (time.perf_counter() - start) / (20 * len(dict_words))
    start = time.perf_counter()
    system.convert_words(oov_words)
    per_oov = (time.perf_counter() - start) / len(oov_words)
    assert per_oov >= 100 * per_dict
