"""End-to-end orchestration with a manifest for resumable runs.

Artifact layout under ``work_dir`` (schema ``monoses-kit/1``)::

    manifest.tsv        stage, input digest, parameters (JSON), output list
    log.tsv             timestamp, stage, event
    prep/{e,f}.txt      tokenized, truecased corpora (+ truecase.{e,f})
    inventory/{e,f}.tsv phrase inventories
    embed/{e,f}.vec     monolingual phrase embeddings
    map/{e,f}.vec       embeddings in the shared space
    induce/             initial phrase tables e-f.table, f-e.table
    lm/{e,f}.arpa       language models
    tune/               sample.{e,f}, tuned weights, loss log and figure
    refine/             final systems system.e-f/, system.f-e/
    eval/               hypotheses, report.tsv, bleu.png
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import time
from dataclasses import dataclass, field, fields

from . import corpus as corpus_mod
from .bleu import bleu_report
from .crossmap import self_learn
from .decoder import DecoderConfig, LogLinearWeights, System
from .embeddings import EmbeddingSpace, SgnsConfig, train_phrase_embeddings
from .ngram_lm import LanguageModel, train_kn_lm
from .phrase_induction import build_initial_phrase_table
from .refine import refine_loop
from .tables import PhraseTable, ReorderingModel
from .tuning import LossBreakdown, MertConfig, alternating_tune

SCHEMA = "monoses-kit/1"
STAGES = ("prep", "inventory", "embed", "map", "induce", "lm", "tune", "refine", "eval")


class ConfigError(ValueError):
    """Invalid configuration; reported before any stage runs."""


class StageError(RuntimeError):
    def __init__(self, stage, cause):
        super().__init__(f"stage {stage} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineConfig:
    mono_e: str = ""
    mono_f: str = ""
    work_dir: str = "work"
    test_src: str = ""
    test_ref: str = ""
    eval_direction: str = "f-e"
    truecase: bool = True
    inventory_caps: str = "200000,400000,400000"
    emb_dim: int = 300
    emb_window: int = 5
    emb_negatives: int = 10
    emb_epochs: int = 5
    emb_subsample: float = 1e-5
    emb_learning_rate: float = 0.025
    deterministic: bool = True
    jobs: int = 1
    map_max_iters: int = 50
    map_threshold: float = 1e-6
    map_cutoff: int = 20000
    retrieval: str = "cosine"
    k: int = 100
    epsilon: float = 0.3
    lm_order: int = 5
    beam: int = 100
    distortion_limit: int = 6
    table_limit: int = 20
    max_phrase_len: int = 5
    nbest: int = 100
    recombination_arcs: int = 2
    tune_sample: int = 2000
    tune_rounds: int = 4
    tune_random_directions: int = 8
    tune_max_outer: int = 20
    back_beam: int = 10
    bleu_smoothing: str = "plus_one_higher_orders"
    flip_lm_hinge: bool = False
    refine_iterations: int = 3
    synthetic_cap: int = 10_000_000
    seed: int = 1

    # ---- parsing ---------------------------------------------------------
    @classmethod
    def from_items(cls, items):
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        for key, raw in items:
            key = key.strip().replace("-", "_")
            if key not in types:
                raise ConfigError(f"unknown configuration key {key!r}")
            values[key] = _convert(key, raw.strip(), types[key])
        return cls(**values)

    @classmethod
    def load(cls, path, overrides=()):
        items = []
        if path:
            if not os.path.exists(path):
                raise ConfigError(f"configuration file not found: {path}")
            with open(path, encoding="utf-8") as f:
                for n, line in enumerate(f, 1):
                    line = line.split("#", 1)[0].strip()
                    if not line:
                        continue
                    if "=" not in line:
                        raise ConfigError(f"{path}:{n}: expected key=value")
                    items.append(tuple(line.split("=", 1)))
        for o in overrides:
            if "=" not in o:
                raise ConfigError(f"override {o!r} is not key=value")
            items.append(tuple(o.split("=", 1)))
        config = cls.from_items(items)
        if path:
            # relative corpus paths are relative to the config file
            base = os.path.dirname(os.path.abspath(path))
            for name in ("mono_e", "mono_f", "test_src", "test_ref", "work_dir"):
                value = getattr(config, name)
                if value and not os.path.isabs(value):
                    setattr(config, name, os.path.join(base, value))
        return config

    def validate(self):
        for name in ("mono_e", "mono_f"):
            path = getattr(self, name)
            if not path:
                raise ConfigError(f"{name} is required")
            if not os.path.exists(path):
                raise ConfigError(f"{name} does not exist: {path}")
        if bool(self.test_src) != bool(self.test_ref):
            raise ConfigError("test_src and test_ref must be given together")
        for name in ("test_src", "test_ref"):
            path = getattr(self, name)
            if path and not os.path.exists(path):
                raise ConfigError(f"{name} does not exist: {path}")
        caps = self.caps()
        if len(caps) != 3 or min(caps) < 0:
            raise ConfigError("inventory_caps needs three non-negative integers")
        positive = ("emb_dim", "emb_window", "emb_epochs", "k", "lm_order", "beam", "table_limit", "max_phrase_len",
                    "nbest", "recombination_arcs", "tune_sample", "tune_rounds", "refine_iterations",
                    "synthetic_cap", "jobs", "back_beam", "tune_max_outer")
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if not 0 < self.epsilon < 1:
            raise ConfigError("epsilon must lie in (0, 1)")
        if self.retrieval not in ("cosine", "csls"):
            raise ConfigError("retrieval must be cosine or csls")
        if self.eval_direction not in ("e-f", "f-e"):
            raise ConfigError("eval_direction must be e-f or f-e")
        if self.distortion_limit < 0 or self.emb_negatives < 0 or self.tune_random_directions < 0:
            raise ConfigError("distortion_limit, emb_negatives and tune_random_directions must be non-negative")
        return self

    def caps(self):
        try:
            return tuple(int(x) for x in str(self.inventory_caps).split(","))
        except ValueError as exc:
            raise ConfigError(f"bad inventory_caps: {self.inventory_caps}") from exc

    def decoder_config(self):
        return DecoderConfig(beam_size=self.beam, distortion_limit=self.distortion_limit,
                             max_phrase_len=self.max_phrase_len, nbest_size=self.nbest,
                             table_limit=self.table_limit, recombination_arcs=self.recombination_arcs)

    def mert_config(self):
        return MertConfig(nbest_size=self.nbest, random_directions=self.tune_random_directions,
                          max_outer=self.tune_max_outer, back_beam=self.back_beam, seed=self.seed)

    def sgns_config(self):
        return SgnsConfig(dimension=self.emb_dim, window=self.emb_window, negatives=self.emb_negatives,
                          epochs=self.emb_epochs, learning_rate=self.emb_learning_rate,
                          subsample=self.emb_subsample, seed=self.seed, workers=self.jobs,
                          deterministic=self.deterministic)


def _convert(key, raw, typ):
    typ = typ if isinstance(typ, str) else typ.__name__
    try:
        if typ == "bool":
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if typ == "int":
            return int(float(raw)) if "e" in raw.lower() else int(raw)
        if typ == "float":
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return raw


# ------------------------------------------------------------ bookkeeping
def file_digest(path):
    h = hashlib.sha256()
    if os.path.isdir(path):
        for root, _, files in sorted(os.walk(path)):
            for name in sorted(files):
                h.update(file_digest(os.path.join(root, name)).encode())
        return h.hexdigest()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


class _TsvFormatter(logging.Formatter):
    def format(self, record):
        stamp = time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(record.created))
        return f"{stamp}\t{record.name.rsplit('.', 1)[-1]}\t{record.getMessage()}"


def _logger(work_dir, echo=True):
    log = logging.getLogger("monoses_kit.pipeline")
    log.setLevel(logging.INFO)
    for h in list(log.handlers):
        log.removeHandler(h)
        h.close()
    handler = logging.FileHandler(os.path.join(work_dir, "log.tsv"), encoding="utf-8")
    handler.setFormatter(_TsvFormatter())
    log.addHandler(handler)
    if echo:
        stream = logging.StreamHandler()
        stream.setFormatter(_TsvFormatter())
        log.addHandler(stream)
    log.propagate = False
    return log


class _StageLog:
    """Routes messages to the logger of whichever stage is running."""

    def __init__(self):
        self.stage = "pipeline"

    def info(self, message):
        logging.getLogger(f"monoses_kit.pipeline.{self.stage}").info(message)


class Manifest:
    def __init__(self, path):
        self.path = path
        self.entries = {}
        if os.path.exists(path):
            with open(path, encoding="utf-8") as f:
                for line in f:
                    cols = line.rstrip("\n").split("\t")
                    if len(cols) >= 4 and cols[0] != "stage":
                        self.entries[cols[0]] = (cols[1], cols[2], json.loads(cols[3]))

    def matches(self, stage, digest, work_dir):
        entry = self.entries.get(stage)
        if entry is None or entry[0] != digest:
            return False
        return all(os.path.exists(os.path.join(work_dir, p)) for p in entry[2])

    def record(self, stage, digest, params, outputs):
        self.entries[stage] = (digest, json.dumps(params, sort_keys=True), list(outputs))
        with open(self.path, "w", encoding="utf-8") as f:
            print(f"stage\tdigest\tparameters\toutputs\t{SCHEMA}", file=f)
            for name in STAGES:
                if name in self.entries:
                    d, p, o = self.entries[name]
                    print(f"{name}\t{d}\t{p}\t{json.dumps(o)}", file=f)


@dataclass
class Stage:
    name: str
    inputs: list
    params: dict
    outputs: list
    run: object


@dataclass
class RunReport:
    executed: list = field(default_factory=list)
    skipped: list = field(default_factory=list)
    bleu: dict = None


# ----------------------------------------------------------- system files
def save_system(system: System, directory, lm_path):
    os.makedirs(directory, exist_ok=True)
    system.table.write(os.path.join(directory, "table"))
    system.weights.save(os.path.join(directory, "weights"))
    if system.reordering is not None:
        system.reordering.write(os.path.join(directory, "reordering"))
    with open(os.path.join(directory, "lm.path"), "w", encoding="utf-8") as f:
        print(os.path.abspath(lm_path), file=f)


def load_system(directory, config: DecoderConfig = None, lm=None) -> System:
    table = PhraseTable.read(os.path.join(directory, "table"))
    weights = LogLinearWeights.load(os.path.join(directory, "weights"))
    ro_path = os.path.join(directory, "reordering")
    reordering = ReorderingModel.read(ro_path) if os.path.exists(ro_path) else None
    if lm is None:
        with open(os.path.join(directory, "lm.path"), encoding="utf-8") as f:
            lm = LanguageModel.read_arpa(f.read().strip())
    return System(table, lm, weights, config or DecoderConfig(), reordering)


def evaluate(system: System, test_source, test_reference, out_dir=None, figure=True):
    """Translate a test set and score it; writes hypotheses, report and figure when ``out_dir`` is set."""
    source = [tuple(s) for s in test_source]
    reference = [tuple(s) for s in test_reference]
    if len(source) != len(reference):
        raise ValueError(f"test source has {len(source)} lines but reference has {len(reference)}")
    hyps = system.translate_all(source)
    report = bleu_report(hyps, reference)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        corpus_mod.write_sentences(os.path.join(out_dir, "hyp.txt"), hyps)
        write_report(report, os.path.join(out_dir, "report.tsv"))
        if figure:
            from .plotting import plot_bleu_report
            plot_bleu_report(report, os.path.join(out_dir, "bleu.png"))
    return report


def write_report(report, path):
    with open(path, "w", encoding="utf-8") as f:
        print(f"bleu\t{report['bleu']:.6f}", file=f)
        print(f"brevity_penalty\t{report['brevity_penalty']:.6f}", file=f)
        for n, p in enumerate(report["precisions"], 1):
            print(f"precision_{n}\t{p:.6f}", file=f)
        for n, (m, c) in enumerate(zip(report["matches"], report["counts"]), 1):
            print(f"matches_{n}\t{m}\t{c}", file=f)
        print(f"hyp_len\t{report['hyp_len']}", file=f)
        print(f"ref_len\t{report['ref_len']}", file=f)


def write_loss_log(losses, path, figure_path=None):
    with open(path, "w", encoding="utf-8") as f:
        print("half_round\t" + "\t".join(LossBreakdown.HEADER), file=f)
        for i, b in enumerate(losses):
            print(f"{i}\t" + "\t".join(f"{float(v):.6f}" for v in b.as_row()), file=f)
    if figure_path:
        from .plotting import plot_loss_history
        plot_loss_history(losses, figure_path)


# ----------------------------------------------------------------- stages
def _sample(corpus, size, seed):
    rng = random.Random(seed)
    candidates = [s for s in corpus if s]
    if len(candidates) <= size:
        return candidates
    idx = sorted(rng.sample(range(len(candidates)), size))
    return [candidates[i] for i in idx]


def build_stages(cfg: PipelineConfig, log):
    w = cfg.work_dir

    def p(*parts):
        return os.path.join(w, *parts)

    def prep():
        os.makedirs(p("prep"), exist_ok=True)
        for lang, src in (("e", cfg.mono_e), ("f", cfg.mono_f)):
            if cfg.truecase:
                corpus_mod.prepare_file(src, p("prep", f"{lang}.txt"), p("prep", f"truecase.{lang}"))
            else:
                with open(src, encoding="utf-8") as f:
                    corpus_mod.write_sentences(p("prep", f"{lang}.txt"),
                                               (corpus_mod.normalize_and_tokenize(x) for x in f))
                open(p("prep", f"truecase.{lang}"), "w").close()

    def inventory():
        os.makedirs(p("inventory"), exist_ok=True)
        for lang in "ef":
            inv = corpus_mod.build_ngram_inventory(corpus_mod.read_sentences(p("prep", f"{lang}.txt")), cfg.caps())
            inv.save(p("inventory", f"{lang}.tsv"))
            log.info(f"inventory {lang}: {len(inv)} phrases")

    def embed():
        os.makedirs(p("embed"), exist_ok=True)
        for lang in "ef":
            corpus = corpus_mod.read_corpus(p("prep", f"{lang}.txt"))
            inv = corpus_mod.PhraseInventory.load(p("inventory", f"{lang}.tsv"))
            space = train_phrase_embeddings(corpus, inv, cfg.sgns_config())
            space.save(p("embed", f"{lang}.vec"))
            log.info(f"embeddings {lang}: {len(space)} x {space.dimension}")

    def map_():
        os.makedirs(p("map"), exist_ok=True)
        e = EmbeddingSpace.load(p("embed", "e.vec"))
        f = EmbeddingSpace.load(p("embed", "f.vec"))
        result = self_learn(e, f, cfg.map_max_iters, cfg.map_threshold, cfg.retrieval, cfg.map_cutoff,
                            log=log.info)
        me, mf = result.apply(e, f)
        me.save(p("map", "e.vec"))
        mf.save(p("map", "f.vec"))
        with open(p("map", "dictionary.tsv"), "w", encoding="utf-8") as out:
            for a, b in sorted(result.dictionary):
                print(f"{' '.join(a)}\t{' '.join(b)}", file=out)

    def induce():
        os.makedirs(p("induce"), exist_ok=True)
        e = EmbeddingSpace.load(p("map", "e.vec"))
        f = EmbeddingSpace.load(p("map", "f.vec"))
        for name, a, b in (("e-f", e, f), ("f-e", f, e)):
            table, info = build_initial_phrase_table(a, b, cfg.k, cfg.epsilon, log=log.info)
            table.write(p("induce", f"{name}.table"))
            log.info(f"initial table {name}: {len(table)} entries, {info}")

    def lm():
        os.makedirs(p("lm"), exist_ok=True)
        for lang in "ef":
            model = train_kn_lm(corpus_mod.read_sentences(p("prep", f"{lang}.txt")), cfg.lm_order)
            model.write_arpa(p("lm", f"{lang}.arpa"))

    def systems(table_ef, table_fe, ro_ef=None, ro_fe=None):
        lm_e = LanguageModel.read_arpa(p("lm", "e.arpa"))
        lm_f = LanguageModel.read_arpa(p("lm", "f.arpa"))
        dc = cfg.decoder_config()
        return (System(table_ef, lm_f, LogLinearWeights.default(), dc, ro_ef),
                System(table_fe, lm_e, LogLinearWeights.default(), dc, ro_fe))

    def samples():
        e = _sample(corpus_mod.read_corpus(p("prep", "e.txt")), cfg.tune_sample, cfg.seed)
        f = _sample(corpus_mod.read_corpus(p("prep", "f.txt")), cfg.tune_sample, cfg.seed + 1)
        return e, f

    def tune_fn(sample_e, sample_f):
        def run(ef, fe):
            return alternating_tune(ef, fe, sample_e, sample_f, cfg.tune_rounds, cfg.mert_config(),
                                    cfg.bleu_smoothing, cfg.flip_lm_hinge, log=log.info)
        return run

    def tune():
        os.makedirs(p("tune"), exist_ok=True)
        ef, fe = systems(PhraseTable.read(p("induce", "e-f.table")), PhraseTable.read(p("induce", "f-e.table")))
        sample_e, sample_f = samples()
        corpus_mod.write_sentences(p("tune", "sample.e"), sample_e)
        corpus_mod.write_sentences(p("tune", "sample.f"), sample_f)
        result = tune_fn(sample_e, sample_f)(ef, fe)
        result.weights_ef.save(p("tune", "weights.e-f"))
        result.weights_fe.save(p("tune", "weights.f-e"))
        write_loss_log(result.losses, p("tune", "loss_log.tsv"), p("tune", "loss.png"))

    def refine():
        os.makedirs(p("refine"), exist_ok=True)
        ef, fe = systems(PhraseTable.read(p("induce", "e-f.table")), PhraseTable.read(p("induce", "f-e.table")))
        ef = ef.with_weights(LogLinearWeights.load(p("tune", "weights.e-f")))
        fe = fe.with_weights(LogLinearWeights.load(p("tune", "weights.f-e")))
        mono_e = corpus_mod.read_corpus(p("prep", "e.txt"))
        mono_f = corpus_mod.read_corpus(p("prep", "f.txt"))
        sample_e = corpus_mod.read_corpus(p("tune", "sample.e"))
        sample_f = corpus_mod.read_corpus(p("tune", "sample.f"))

        def keep(record):
            d = p("refine", f"iter{record.index}")
            os.makedirs(d, exist_ok=True)
            record.syn_ef.write(os.path.join(d, "synthetic.e-f.f"), os.path.join(d, "synthetic.e-f.e"))
            record.syn_fe.write(os.path.join(d, "synthetic.f-e.e"), os.path.join(d, "synthetic.f-e.f"))
            if record.tune_result is not None:
                write_loss_log(record.tune_result.losses, os.path.join(d, "loss_log.tsv"))

        ef, fe, _ = refine_loop(ef, fe, [s for s in mono_e if s], [s for s in mono_f if s], sample_e, sample_f,
                                cfg.refine_iterations, cfg.synthetic_cap, cfg.max_phrase_len, cfg.epsilon,
                                tune=tune_fn(sample_e, sample_f), log=log.info, on_iteration=keep)
        save_system(ef, p("refine", "system.e-f"), p("lm", "f.arpa"))
        save_system(fe, p("refine", "system.f-e"), p("lm", "e.arpa"))

    def eval_():
        system = load_system(p("refine", f"system.{cfg.eval_direction}"), cfg.decoder_config())
        src = corpus_mod.read_corpus(p("eval", "test.src"))
        ref = corpus_mod.read_corpus(p("eval", "test.ref"))
        report = evaluate(system, src, ref, p("eval"))
        log.info(f"BLEU {report['bleu']:.4f}")

    def eval_inputs():
        # the test files are tokenized like the training data before scoring
        os.makedirs(p("eval"), exist_ok=True)
        for name, path in (("test.src", cfg.test_src), ("test.ref", cfg.test_ref)):
            with open(path, encoding="utf-8") as f:
                corpus_mod.write_sentences(p("eval", name), (corpus_mod.normalize_and_tokenize(x) for x in f))

    def eval_stage():
        eval_inputs()
        eval_()

    emb = {k: getattr(cfg, k) for k in ("emb_dim", "emb_window", "emb_negatives", "emb_epochs", "emb_subsample",
                                         "emb_learning_rate", "deterministic", "jobs", "seed")}
    dec = {k: getattr(cfg, k) for k in ("beam", "distortion_limit", "table_limit", "max_phrase_len", "nbest",
                                         "recombination_arcs")}
    tun = {k: getattr(cfg, k) for k in ("tune_sample", "tune_rounds", "tune_random_directions", "tune_max_outer",
                                         "back_beam", "bleu_smoothing", "flip_lm_hinge", "seed")}
    stages = [
        Stage("prep", [cfg.mono_e, cfg.mono_f], {"truecase": cfg.truecase},
              ["prep/e.txt", "prep/f.txt"], prep),
        Stage("inventory", ["prep/e.txt", "prep/f.txt"], {"caps": cfg.caps()},
              ["inventory/e.tsv", "inventory/f.tsv"], inventory),
        Stage("embed", ["prep/e.txt", "prep/f.txt", "inventory/e.tsv", "inventory/f.tsv"], emb,
              ["embed/e.vec", "embed/f.vec"], embed),
        Stage("map", ["embed/e.vec", "embed/f.vec"],
              {"max_iters": cfg.map_max_iters, "threshold": cfg.map_threshold, "cutoff": cfg.map_cutoff,
               "retrieval": cfg.retrieval}, ["map/e.vec", "map/f.vec"], map_),
        Stage("induce", ["map/e.vec", "map/f.vec"], {"k": cfg.k, "epsilon": cfg.epsilon},
              ["induce/e-f.table", "induce/f-e.table"], induce),
        Stage("lm", ["prep/e.txt", "prep/f.txt"], {"order": cfg.lm_order}, ["lm/e.arpa", "lm/f.arpa"], lm),
        Stage("tune", ["induce/e-f.table", "induce/f-e.table", "lm/e.arpa", "lm/f.arpa"], {**dec, **tun},
              ["tune/weights.e-f", "tune/weights.f-e"], tune),
        Stage("refine", ["induce/e-f.table", "induce/f-e.table", "lm/e.arpa", "lm/f.arpa", "tune/weights.e-f",
                         "tune/weights.f-e"],
              {**dec, **tun, "iterations": cfg.refine_iterations, "cap": cfg.synthetic_cap,
               "max_phrase_len": cfg.max_phrase_len, "epsilon": cfg.epsilon},
              ["refine/system.e-f/table", "refine/system.f-e/table"], refine),
    ]
    if cfg.test_src:
        stages.append(Stage("eval", [cfg.test_src, cfg.test_ref, "refine/system.e-f", "refine/system.f-e"],
                            {**dec, "direction": cfg.eval_direction}, ["eval/report.tsv"], eval_stage))
    return stages


def run_pipeline(cfg: PipelineConfig, only=None, echo=True) -> RunReport:
    """Run every stage in order, skipping those whose manifest entry still matches."""
    cfg.validate()
    if only is not None and only not in STAGES:
        raise ConfigError(f"unknown stage {only!r}; choose from {', '.join(STAGES)}")
    os.makedirs(cfg.work_dir, exist_ok=True)
    _logger(cfg.work_dir, echo)
    log = _StageLog()
    manifest = Manifest(os.path.join(cfg.work_dir, "manifest.tsv"))
    report = RunReport()
    for stage in build_stages(cfg, log):
        if only is not None and stage.name != only:
            continue
        log.stage = stage.name
        stage_log = log
        paths = [x if os.path.isabs(x) else os.path.join(cfg.work_dir, x) for x in stage.inputs]
        missing = [x for x in paths if not os.path.exists(x)]
        if missing:
            raise StageError(stage.name, f"missing input {missing[0]}")
        digest = hashlib.sha256(json.dumps(
            {"stage": stage.name, "params": stage.params, "inputs": [file_digest(x) for x in paths]},
            sort_keys=True, default=str).encode()).hexdigest()
        if manifest.matches(stage.name, digest, cfg.work_dir):
            stage_log.info("skipped (manifest unchanged)")
            report.skipped.append(stage.name)
            continue
        stage_log.info("start")
        start = time.time()
        try:
            stage.run()
        except Exception as exc:
            stage_log.info(f"failed: {exc}")
            raise StageError(stage.name, exc) from exc
        manifest.record(stage.name, digest, stage.params, stage.outputs)
        stage_log.info(f"done in {time.time() - start:.1f}s")
        report.executed.append(stage.name)
    eval_report = os.path.join(cfg.work_dir, "eval", "report.tsv")
    if os.path.exists(eval_report):
        with open(eval_report, encoding="utf-8") as f:
            report.bleu = {line.split("\t")[0]: line.rstrip("\n").split("\t")[1:] for line in f}
    return report
