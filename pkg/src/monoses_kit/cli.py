"""Command line interface: ``monoses-kit <command> ...``.

Exit status is 0 on success, 1 for invalid input or configuration and 2
when a computation fails.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import corpus as corpus_mod
from .pipeline import ConfigError, PipelineConfig, StageError


class UsageError(ValueError):
    pass


def _need(path):
    if not os.path.exists(path):
        raise UsageError(f"no such file: {path}")
    return path


def _lines(path):
    return corpus_mod.read_corpus(_need(path))


def _out_dir(path):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)


def _decoder_config(args):
    from .decoder import DecoderConfig
    return DecoderConfig(beam_size=args.beam, distortion_limit=args.distortion_limit, table_limit=args.table_limit,
                         max_phrase_len=args.max_phrase_len, nbest_size=args.nbest_size)


def _system(args, table, lm, weights=None, reordering=None):
    from .decoder import LogLinearWeights, System
    from .ngram_lm import LanguageModel
    from .tables import PhraseTable, ReorderingModel
    w = LogLinearWeights.load(_need(weights)) if weights else LogLinearWeights.default()
    ro = ReorderingModel.read(_need(reordering)) if reordering else None
    return System(PhraseTable.read(_need(table)), LanguageModel.read_arpa(_need(lm)), w, _decoder_config(args), ro)


# ---------------------------------------------------------------- commands
def cmd_prep(args):
    model = corpus_mod.prepare_file(_need(args.input), args.output, args.truecase_model)
    print(f"prepared\t{args.output}\ttruecase_entries\t{len(model.casing)}")


def cmd_inventory(args):
    caps = (args.max_uni, args.max_bi, args.max_tri)
    inv = corpus_mod.build_ngram_inventory(corpus_mod.read_sentences(_need(args.input)), caps)
    inv.save(args.output)
    for n in (1, 2, 3):
        print(f"order\t{n}\t{len(inv.order(n))}")


def cmd_embed(args):
    from .embeddings import SgnsConfig, train_phrase_embeddings_full
    inv = corpus_mod.PhraseInventory.load(_need(args.inventory))
    config = SgnsConfig(dimension=args.dim, window=args.window, negatives=args.negatives, epochs=args.epochs,
                        learning_rate=args.learning_rate, subsample=args.subsample, seed=args.seed,
                        workers=args.jobs, deterministic=not args.hogwild)
    result = train_phrase_embeddings_full(_lines(args.corpus), inv, config)
    result.space.save(args.out)
    for epoch, loss in enumerate(result.heldout_losses):
        print(f"epoch\t{epoch}\theldout_loss\t{loss:.6f}")


def cmd_map(args):
    from .crossmap import self_learn
    from .embeddings import EmbeddingSpace
    src = EmbeddingSpace.load(_need(args.src))
    tgt = EmbeddingSpace.load(_need(args.tgt))
    result = self_learn(src, tgt, args.max_iters, args.threshold, args.retrieval, args.cutoff,
                        log=lambda m: print(m, file=sys.stderr))
    ms, mt = result.apply(src, tgt)
    ms.save(args.out_src)
    mt.save(args.out_tgt)
    for i, obj in enumerate(result.objectives):
        print(f"iteration\t{i}\tobjective\t{obj:.6f}")
    print(f"dictionary\t{len(result.dictionary)}")


def cmd_induce(args):
    from .embeddings import EmbeddingSpace
    from .phrase_induction import build_initial_phrase_table
    src = EmbeddingSpace.load(_need(args.src_emb))
    tgt = EmbeddingSpace.load(_need(args.tgt_emb))
    table, info = build_initial_phrase_table(src, tgt, args.k, args.epsilon, log=lambda m: print(m, file=sys.stderr))
    table.write(args.out)
    for key, value in info.items():
        print(f"{key}\t{value:.6g}")
    print(f"entries\t{len(table)}")


def cmd_lm_train(args):
    from .ngram_lm import train_kn_lm
    model = train_kn_lm(corpus_mod.read_sentences(_need(args.corpus)), args.order)
    model.write_arpa(args.out)


def cmd_lm_score(args):
    from .ngram_lm import LanguageModel, lm_logprob
    model = LanguageModel.read_arpa(_need(args.model))
    for i, s in enumerate(_lines(args.input)):
        print(f"{i}\t{lm_logprob(model, s):.6f}")


def cmd_lm_entropy(args):
    from .ngram_lm import LanguageModel, per_word_entropy
    model = LanguageModel.read_arpa(_need(args.model))
    print(f"{per_word_entropy(model, _lines(args.input)):.6f}")


def cmd_translate(args):
    from .decoder import format_nbest_line
    if args.nbest:
        args.nbest_size = args.nbest
    system = _system(args, args.table, args.lm, args.weights, args.reordering)
    decoder = system.decoder()
    out = open(args.output, "w", encoding="utf-8") if args.output else sys.stdout
    try:
        for i, s in enumerate(_lines(args.input)):
            if args.nbest:
                for h in decoder.nbest(s, args.nbest):
                    print(format_nbest_line(i, h), file=out)
            else:
                print(" ".join(decoder.translate(s).tokens), file=out)
    finally:
        if out is not sys.stdout:
            out.close()


def cmd_bleu(args):
    from .bleu import bleu_from_array, bleu_stats, sum_stats
    hyps, refs = _lines(args.hyp), _lines(args.ref)
    if len(hyps) != len(refs):
        raise UsageError(f"{args.hyp} has {len(hyps)} lines but {args.ref} has {len(refs)}")
    stats = sum_stats(bleu_stats(h, r) for h, r in zip(hyps, refs))
    print(f"{bleu_from_array(stats.as_array(), 'plus_one_higher_orders' if args.smooth else 'none'):.4f}")


def _print_report(report):
    print(f"bleu\t{report['bleu']:.6f}")
    print(f"brevity_penalty\t{report['brevity_penalty']:.6f}")
    for n, p in enumerate(report["precisions"], 1):
        print(f"precision_{n}\t{p:.6f}")
    print(f"hyp_len\t{report['hyp_len']}")
    print(f"ref_len\t{report['ref_len']}")


def cmd_tune(args):
    from .pipeline import write_loss_log
    from .tuning import MertConfig, alternating_tune
    ef = _system(args, args.table_ef, args.lm_f, args.weights_ef)
    fe = _system(args, args.table_fe, args.lm_e, args.weights_fe)
    config = MertConfig(nbest_size=args.nbest_size, random_directions=args.random_directions,
                        max_outer=args.max_outer, back_beam=args.back_beam, seed=args.seed)
    result = alternating_tune(ef, fe, _lines(args.sample_e), _lines(args.sample_f), args.rounds, config,
                              args.smoothing, args.flip_lm_hinge, log=lambda m: print(m, file=sys.stderr))
    for path in (args.out_ef, args.out_fe):
        _out_dir(path)
    result.weights_ef.save(args.out_ef)
    result.weights_fe.save(args.out_fe)
    if args.loss_log:
        _out_dir(args.loss_log)
        write_loss_log(result.losses, args.loss_log, os.path.splitext(args.loss_log)[0] + ".png")
    for i, b in enumerate(result.losses):
        print(f"half_round\t{i}\tloss\t{b.total:.6f}")


def cmd_refine(args):
    from .pipeline import load_system, save_system
    from .refine import refine_loop
    from .tuning import MertConfig, alternating_tune
    config = _decoder_config(args)
    ef = load_system(_need(args.system_ef), config)
    fe = load_system(_need(args.system_fe), config)
    sample_e = _lines(args.sample_e) if args.sample_e else None
    sample_f = _lines(args.sample_f) if args.sample_f else None
    tune = None
    if args.iterations > 1:
        if not (sample_e and sample_f):
            raise UsageError("--sample-e and --sample-f are needed when more than one iteration runs")
        mert = MertConfig(nbest_size=args.nbest_size, back_beam=args.back_beam, seed=args.seed)

        def tune(a, b):
            return alternating_tune(a, b, sample_e, sample_f, args.rounds, mert,
                                    log=lambda m: print(m, file=sys.stderr))
    mono_e = [s for s in _lines(args.mono_e) if s]
    mono_f = [s for s in _lines(args.mono_f) if s]
    ef, fe, _ = refine_loop(ef, fe, mono_e, mono_f, sample_e, sample_f, args.iterations, args.cap,
                            args.max_phrase_len, args.epsilon, tune=tune, log=lambda m: print(m, file=sys.stderr))
    with open(os.path.join(args.system_ef, "lm.path"), encoding="utf-8") as f:
        lm_f = f.read().strip()
    with open(os.path.join(args.system_fe, "lm.path"), encoding="utf-8") as f:
        lm_e = f.read().strip()
    save_system(ef, os.path.join(args.out_dir, "system.e-f"), lm_f)
    save_system(fe, os.path.join(args.out_dir, "system.f-e"), lm_e)
    print(f"e-f\t{len(ef.table)}\nf-e\t{len(fe.table)}")


def cmd_system(args):
    from .pipeline import save_system
    save_system(_system(args, args.table, args.lm, args.weights, args.reordering), args.out, args.lm)


def cmd_schedule(args):
    from .schedule import backtranslation_mix
    mix = backtranslation_mix(args.t, args.n, args.a)
    print(f"{mix.n_smt}\t{mix.n_nmt_greedy}\t{mix.n_nmt_sampled}")


def cmd_evaluate(args):
    from .pipeline import evaluate, load_system
    system = load_system(_need(args.system), _decoder_config(args))
    report = evaluate(system, _lines(args.src), _lines(args.ref), args.out_dir)
    _print_report(report)


def cmd_cipher(args):
    from .cipher import generate_cipher
    data = generate_cipher(args.sentences, args.content_words, args.numerals, args.heldout, args.seed)
    os.makedirs(args.out_dir, exist_ok=True)
    files = (("mono.e", data.mono_e), ("mono.f", data.mono_f), ("test.f", data.heldout_f), ("test.e", data.heldout_e))
    for name, sents in files:
        corpus_mod.write_sentences(os.path.join(args.out_dir, name), sents)
    with open(os.path.join(args.out_dir, "lexicon.tsv"), "w", encoding="utf-8") as f:
        for e, fw in sorted(data.lexicon.items()):
            print(f"{e}\t{fw}", file=f)
    print(f"wrote\t{args.out_dir}")


def cmd_pipeline(args):
    from .pipeline import run_pipeline
    overrides = list(args.set or ())
    if args.jobs is not None:
        overrides.append(f"jobs={args.jobs}")
    cfg = PipelineConfig.load(args.config, overrides)
    report = run_pipeline(cfg, args.stage, echo=not args.quiet)
    print(f"executed\t{','.join(report.executed) or '-'}")
    print(f"skipped\t{','.join(report.skipped) or '-'}")
    if report.bleu:
        print(f"bleu\t{report.bleu['bleu'][0]}")


# ------------------------------------------------------------------ parser
def _decoder_args(p):
    p.add_argument("--beam", type=int, default=100)
    p.add_argument("--distortion-limit", type=int, default=6)
    p.add_argument("--table-limit", type=int, default=20)
    p.add_argument("--max-phrase-len", type=int, default=5)
    p.add_argument("--nbest-size", type=int, default=100, help="n-best list size used by tuning")


def build_parser():
    parser = argparse.ArgumentParser(prog="monoses-kit", description="Unsupervised phrase-based translation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("corpus", help="corpus preparation")
    csub = p.add_subparsers(dest="action", required=True)
    p = csub.add_parser("prep", help="normalize, tokenize and truecase a raw corpus")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--truecase-model")
    p.set_defaults(func=cmd_prep)
    p = csub.add_parser("inventory", help="most frequent 1- to 3-grams")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--max-uni", type=int, default=200_000)
    p.add_argument("--max-bi", type=int, default=400_000)
    p.add_argument("--max-tri", type=int, default=400_000)
    p.set_defaults(func=cmd_inventory)

    p = sub.add_parser("embed", help="phrase embeddings")
    esub = p.add_subparsers(dest="action", required=True)
    p = esub.add_parser("train")
    p.add_argument("--corpus", required=True)
    p.add_argument("--inventory", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dim", type=int, default=300)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--negatives", type=int, default=10)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--learning-rate", type=float, default=0.025)
    p.add_argument("--subsample", type=float, default=1e-5)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--deterministic", action="store_true", help="serial, bit-reproducible training (default)")
    mode.add_argument("--hogwild", action="store_true", help="lock-free parallel updates, not reproducible")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("map", help="self-learning cross-lingual mapping")
    p.add_argument("--src", required=True)
    p.add_argument("--tgt", required=True)
    p.add_argument("--out-src", required=True)
    p.add_argument("--out-tgt", required=True)
    p.add_argument("--max-iters", type=int, default=50)
    p.add_argument("--threshold", type=float, default=1e-6)
    p.add_argument("--retrieval", choices=("cosine", "csls"), default="cosine")
    p.add_argument("--cutoff", type=int, default=20000)
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("induce", help="initial phrase table from mapped embeddings")
    p.add_argument("--src-emb", required=True)
    p.add_argument("--tgt-emb", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--epsilon", type=float, default=0.3)
    p.set_defaults(func=cmd_induce)

    p = sub.add_parser("lm", help="n-gram language models")
    lsub = p.add_subparsers(dest="action", required=True)
    p = lsub.add_parser("train")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--order", type=int, default=5)
    p.set_defaults(func=cmd_lm_train)
    for name, func in (("score", cmd_lm_score), ("entropy", cmd_lm_entropy)):
        p = lsub.add_parser(name)
        p.add_argument("--model", required=True)
        p.add_argument("--input", required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("translate", help="decode a tokenized file")
    p.add_argument("--table", required=True)
    p.add_argument("--lm", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--weights")
    p.add_argument("--reordering")
    p.add_argument("--output")
    p.add_argument("--nbest", type=int, default=0, help="write N-best lists instead of 1-best output")
    _decoder_args(p)
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("system", help="bundle a table, LM and weights into a system directory")
    p.add_argument("--table", required=True)
    p.add_argument("--lm", required=True)
    p.add_argument("--weights")
    p.add_argument("--reordering")
    p.add_argument("--out", required=True)
    _decoder_args(p)
    p.set_defaults(func=cmd_system)

    p = sub.add_parser("bleu", help="corpus BLEU of a hypothesis file")
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--smooth", action="store_true", help="add one to higher-order counts")
    p.set_defaults(func=cmd_bleu)

    p = sub.add_parser("tune", help="alternating unsupervised MERT")
    for opt in ("table-ef", "table-fe", "lm-e", "lm-f", "sample-e", "sample-f", "out-ef", "out-fe"):
        p.add_argument(f"--{opt}", required=True)
    p.add_argument("--weights-ef")
    p.add_argument("--weights-fe")
    p.add_argument("--nbest", dest="nbest_size", type=int, default=100)
    p.add_argument("--rounds", type=int, default=4, help="half-rounds")
    p.add_argument("--random-directions", type=int, default=8)
    p.add_argument("--max-outer", type=int, default=20)
    p.add_argument("--back-beam", type=int, default=10)
    p.add_argument("--smoothing", default="plus_one_higher_orders")
    p.add_argument("--flip-lm-hinge", action="store_true")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--loss-log", help="loss per half-round as TSV; a figure is written next to it")
    p.add_argument("--beam", type=int, default=100)
    p.add_argument("--distortion-limit", type=int, default=6)
    p.add_argument("--table-limit", type=int, default=20)
    p.add_argument("--max-phrase-len", type=int, default=5)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("refine", help="joint refinement from system directories")
    p.add_argument("--system-ef", required=True)
    p.add_argument("--system-fe", required=True)
    p.add_argument("--mono-e", required=True)
    p.add_argument("--mono-f", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--sample-e")
    p.add_argument("--sample-f")
    p.add_argument("--iterations", type=int, default=3)
    p.add_argument("--cap", type=int, default=10_000_000)
    p.add_argument("--epsilon", type=float, default=0.3)
    p.add_argument("--rounds", type=int, default=4)
    p.add_argument("--back-beam", type=int, default=10)
    p.add_argument("--seed", type=int, default=1)
    _decoder_args(p)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("schedule", help="back-translation mix for one iteration")
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--a", type=int, required=True)
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("evaluate", help="translate a test set with a saved system and report BLEU")
    p.add_argument("--system", required=True, help="directory written by refine, system or the pipeline")
    p.add_argument("--src", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--out-dir", help="write hyp.txt, report.tsv and bleu.png here")
    _decoder_args(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("cipher", help="generate a synthetic cipher language pair")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--sentences", type=int, default=50000)
    p.add_argument("--content-words", type=int, default=500)
    p.add_argument("--numerals", type=int, default=30)
    p.add_argument("--heldout", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_cipher)

    p = sub.add_parser("pipeline", help="end-to-end run from a config file")
    psub = p.add_subparsers(dest="action", required=True)
    p = psub.add_parser("run")
    p.add_argument("--config", required=True)
    p.add_argument("--stage", help="run only this stage")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    p.add_argument("--jobs", type=int, help="cap on worker threads")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
