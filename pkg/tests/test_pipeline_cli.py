import os

import pytest

from monoses_kit.bleu import bleu_report
from monoses_kit.cli import main
from monoses_kit.corpus import read_corpus, write_sentences
from monoses_kit.decoder import LogLinearWeights, System
from monoses_kit.ngram_lm import train_kn_lm
from monoses_kit.pipeline import PipelineConfig, evaluate, file_digest, load_system, save_system
from monoses_kit.tables import PhraseTable

CONFIG = """\
# tiny cipher run
mono_e = data/mono.e
mono_f = data/mono.f
test_src = data/test.f
test_ref = data/test.e
work_dir = work
inventory_caps = 300,300,300
emb_dim = 32
emb_epochs = 3
emb_subsample = 0
map_cutoff = 300
k = 10
lm_order = 3
beam = 5
distortion_limit = 2
table_limit = 5
nbest = 5
tune_sample = 30
tune_rounds = 1
refine_iterations = 1
synthetic_cap = 1000
"""


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("pipe")
    assert main(["cipher", "--out-dir", str(d / "data"), "--sentences", "2000", "--content-words", "80",
                 "--numerals", "10", "--heldout", "50"]) == 0
    (d / "run.cfg").write_text(CONFIG)
    return d


@pytest.fixture(scope="module")
def first_run(run_dir):
    code = main(["pipeline", "run", "--config", str(run_dir / "run.cfg"), "--quiet"])
    return code


def test_full_run_completes_with_report(run_dir, first_run, capsys):
    assert first_run == 0
    work = run_dir / "work"
    for rel in ("eval/report.tsv", "eval/hyp.txt", "eval/bleu.png", "tune/loss.png", "tune/loss_log.tsv",
                "refine/system.e-f/table", "refine/system.f-e/reordering", "refine/iter1/synthetic.e-f.f"):
        assert (work / rel).exists(), rel
    report = dict(line.split("\t", 1) for line in (work / "eval/report.tsv").read_text().splitlines())
    assert 0.5 <= float(report["bleu"]) <= 1.0
    manifest = (work / "manifest.tsv").read_text().splitlines()
    assert manifest[0].endswith("monoses-kit/1")
    assert [m.split("\t")[0] for m in manifest[1:]] == ["prep", "inventory", "embed", "map", "induce", "lm", "tune",
                                                        "refine", "eval"]
    log = (work / "log.tsv").read_text().splitlines()
    assert all(len(line.split("\t")) == 3 for line in log)
    assert {line.split("\t")[1] for line in log} >= {"prep", "map", "tune", "eval"}


def test_rerun_executes_nothing(run_dir, first_run, capsys):
    assert main(["pipeline", "run", "--config", str(run_dir / "run.cfg"), "--quiet"]) == 0
    out = capsys.readouterr().out
    assert "executed\t-" in out


def test_report_recomputes_from_hypothesis_file(run_dir, first_run):
    work = run_dir / "work"
    hyps = read_corpus(work / "eval/hyp.txt")
    refs = read_corpus(work / "eval/test.ref")
    report = bleu_report(hyps, refs)
    saved = dict(line.split("\t", 1) for line in (work / "eval/report.tsv").read_text().splitlines())
    assert float(saved["bleu"]) == pytest.approx(report["bleu"], abs=1e-6)
    assert int(saved["hyp_len"]) == report["hyp_len"]


def test_evaluate_command_matches_stage(run_dir, first_run, capsys):
    work = run_dir / "work"
    code = main(["evaluate", "--system", str(work / "refine/system.f-e"), "--src", str(work / "eval/test.src"),
                 "--ref", str(work / "eval/test.ref"), "--beam", "5", "--distortion-limit", "2", "--table-limit", "5"])
    assert code == 0
    out = dict(line.split("\t") for line in capsys.readouterr().out.splitlines())
    saved = dict(line.split("\t", 1) for line in (work / "eval/report.tsv").read_text().splitlines())
    assert out["bleu"] == saved["bleu"]


def test_deterministic_stages_reproduce(run_dir, first_run, tmp_path):
    cfg = str(run_dir / "run.cfg")
    for stage in ("prep", "inventory", "embed", "map"):
        assert main(["pipeline", "run", "--config", cfg, "--stage", stage, "--quiet",
                     "--set", f"work_dir={tmp_path / 'again'}"]) == 0
    for rel in ("embed/e.vec", "map/f.vec"):
        assert file_digest(tmp_path / "again" / rel) == file_digest(run_dir / "work" / rel)


def test_missing_corpus_is_a_validation_error(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("mono_e = nowhere.e\nmono_f = nowhere.f\nwork_dir = w\n")
    assert main(["pipeline", "run", "--config", str(cfg), "--quiet"]) == 1
    assert "nowhere.e" in capsys.readouterr().err
    assert not (tmp_path / "w").exists()
    assert main(["pipeline", "run", "--config", str(cfg), "--set", "bogus=1"]) == 1


def test_stage_failure_exit_code(run_dir, tmp_path, capsys):
    code = main(["pipeline", "run", "--config", str(run_dir / "run.cfg"), "--stage", "tune", "--quiet",
                 "--set", f"work_dir={tmp_path / 'fresh'}"])
    assert code == 2
    assert "stage tune failed" in capsys.readouterr().err


def test_config_overrides_win(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("mono_e = a.txt\nbeam = 7\n")
    loaded = PipelineConfig.load(str(cfg), ["beam=9"])
    assert loaded.beam == 9 and loaded.mono_e == str(tmp_path / "a.txt")


# -------------------------------------------------------------- evaluate
def _identity_system():
    table = PhraseTable()
    for w in "abcd":
        table.add((w,), (w,), [0.5] * 6)
    return System(table, train_kn_lm([tuple("abcd"), tuple("dcba")], 2), LogLinearWeights.default())


def test_evaluate_identity_and_mismatch(tmp_path):
    sents = [tuple("abcd"), tuple("abca"), tuple("dcbab")]
    report = evaluate(_identity_system(), sents, sents, tmp_path / "ev")
    assert report["bleu"] == 1.0
    assert (tmp_path / "ev/bleu.png").stat().st_size > 0
    with pytest.raises(ValueError):
        evaluate(_identity_system(), sents, sents[:2])


def test_system_directory_round_trip(tmp_path):
    sysm = _identity_system()
    sysm.lm.write_arpa(tmp_path / "lm.arpa")
    save_system(sysm, tmp_path / "sys", tmp_path / "lm.arpa")
    back = load_system(tmp_path / "sys")
    assert back.table.entries == sysm.table.entries and back.weights == sysm.weights


# ------------------------------------------------------------ subcommands
def test_schedule_and_bleu_commands(tmp_path, capsys):
    assert main(["schedule", "--t", "15", "--n", "1000000", "--a", "30"]) == 0
    assert capsys.readouterr().out == "500000\t250000\t250000\n"
    write_sentences(tmp_path / "h", [tuple("abcd")])
    write_sentences(tmp_path / "r", [tuple("abcde")])
    assert main(["bleu", "--hyp", str(tmp_path / "h"), "--ref", str(tmp_path / "r")]) == 0
    assert capsys.readouterr().out == "0.7788\n"
    assert main(["bleu", "--hyp", str(tmp_path / "h"), "--ref", str(tmp_path / "missing")]) == 1
    assert main(["schedule", "--t", "1", "--n", "5", "--a", "0"]) == 2


def test_module_commands_chain(tmp_path, capsys):
    raw = tmp_path / "raw.txt"
    raw.write_text("The cat sat .\nThe dog sat .\nA cat ran .\n" * 20)
    assert main(["corpus", "prep", "--input", str(raw), "--output", str(tmp_path / "tok")]) == 0
    assert main(["corpus", "inventory", "--input", str(tmp_path / "tok"), "--output", str(tmp_path / "inv"),
                 "--max-uni", "50", "--max-bi", "50", "--max-tri", "50"]) == 0
    assert main(["lm", "train", "--corpus", str(tmp_path / "tok"), "--out", str(tmp_path / "lm"),
                 "--order", "3"]) == 0
    capsys.readouterr()
    assert main(["lm", "entropy", "--model", str(tmp_path / "lm"), "--input", str(tmp_path / "tok")]) == 0
    assert float(capsys.readouterr().out.split()[-1]) > 0
    table = PhraseTable()
    tok = read_corpus(tmp_path / "tok")
    for w in {w for line in tok for w in line}:
        table.add((w,), (w.upper(),), [0.5] * 6)
    table.write(tmp_path / "table")
    lm_tgt = train_kn_lm([tuple(s.upper() for s in line) for line in tok], 2)
    lm_tgt.write_arpa(tmp_path / "lm_tgt")
    assert main(["translate", "--table", str(tmp_path / "table"), "--lm", str(tmp_path / "lm_tgt"),
                 "--input", str(tmp_path / "tok"), "--output", str(tmp_path / "out")]) == 0
    assert read_corpus(tmp_path / "out")[0] == tuple(w.upper() for w in tok[0])
    assert main(["translate", "--table", str(tmp_path / "table"), "--lm", str(tmp_path / "lm_tgt"),
                 "--input", str(tmp_path / "tok"), "--output", str(tmp_path / "nb"), "--nbest", "3"]) == 0
    assert os.path.getsize(tmp_path / "nb") > 0
