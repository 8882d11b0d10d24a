"""Pipeline stages: synthesize, train branches, extract features, fuse and evaluate."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from .charembed import EmbeddingTable, char_embedding, chars_to_vectors, default_table_path, load_embedding_table
from .config import RunConfig, write_snapshot
from .core import Label, Utterance, UtteranceVector, load_corpus, make_rng, split_corpus
from .decoder import decode, load_grammar, read_lattice
from .evaluation import ScoreSet, compare_runs, det_curve, det_svg, eer_from_curve, write_det_csv
from .features import decoder_features, read_feature_rows, write_feature_rows
from .frontend import compute_lfbe, read_wav
from .fusion import TABLE_MASKS, classify, mask_label, mask_name, parse_mask, read_scores, save_fusion, train_fusion, write_scores
from .neural import extract_embedding, init_lstm, load_model, save_model, train_sequence_model
from .synth import generate

log = logging.getLogger(__name__)

# seed sub-streams per stage so branches never share random draws
_SEED_ACOUSTIC = 10
_SEED_CHAR = 11
_SEED_FUSION = 12


class PipelineError(RuntimeError):
    pass


def _stage_seed(config: RunConfig, stream: int) -> int:
    return int(make_rng(config.seed, stream).integers(2**63))


def _require(path: Path, what: str) -> None:
    if not path.exists():
        raise PipelineError(f"{what} not found: {path}")


def load_split(config: RunConfig) -> tuple[list[Utterance], list[Utterance]]:
    _require(config.manifest, "corpus manifest")
    return split_corpus(load_corpus(config.manifest), config.train_fraction, config.seed)


def _lfbe(config: RunConfig, utt: Utterance):
    if utt.audio is None:
        raise PipelineError(f"utterance {utt.id} has no audio")
    path = config.corpus_dir / utt.audio
    _require(path, f"audio for {utt.id}")
    return compute_lfbe(read_wav(path, expected_rate=16000), config.frontend_config())


def _char_table(config: RunConfig) -> EmbeddingTable:
    path = config.char.embedding_table or default_table_path()
    return load_embedding_table(path, config.char.embedding_dim)


def run_synth(config: RunConfig) -> Path:
    manifest = generate(config.synth_config(), config.corpus_dir, config.frontend_config())
    write_snapshot(config, config.root / "resolved_config.json")
    return manifest


def run_train_acoustic(config: RunConfig) -> list[float]:
    train, _ = load_split(config)
    seqs = []
    for utt in train:
        frames = _lfbe(config, utt).frames
        seqs.append((frames, int(utt.label)))
    stacked = np.concatenate([s for s, _ in seqs if len(s)])
    seed = _stage_seed(config, _SEED_ACOUSTIC)
    model = init_lstm(stacked.shape[1], config.acoustic.hidden_dims, make_rng(seed, 0))
    model.normalization = {"mean": stacked.mean(axis=0), "std": np.maximum(stacked.std(axis=0), 1e-6)}
    result = train_sequence_model(model, seqs, config.acoustic.train.to_train_config(seed))
    save_model(result.model, config.model_path("acoustic"), epoch_losses=result.epoch_losses)
    write_snapshot(config, config.root / "resolved_config.json")
    return result.epoch_losses


def run_train_char(config: RunConfig) -> list[float]:
    train, _ = load_split(config)
    table = _char_table(config)
    seqs = [(chars_to_vectors(utt.transcript, table), int(utt.label)) for utt in train]
    seed = _stage_seed(config, _SEED_CHAR)
    model = init_lstm(table.dim, config.char.hidden_dims, make_rng(seed, 0))
    result = train_sequence_model(model, seqs, config.char.train.to_train_config(seed))
    save_model(result.model, config.model_path("char"), epoch_losses=result.epoch_losses, skipped=result.skipped)
    write_snapshot(config, config.root / "resolved_config.json")
    return result.epoch_losses


def extract_utterance(config: RunConfig, utt: Utterance, acoustic, char_model, table, grammar) -> UtteranceVector:
    lfbe = _lfbe(config, utt)
    if lfbe.num_frames == 0:
        raise PipelineError(f"utterance {utt.id} is shorter than one analysis window")
    a = extract_embedding(acoustic, lfbe.frames)
    c = char_embedding(char_model, utt.transcript, table)
    trellis, lattice, best = decode(lfbe, grammar, config.decoder_config())
    if utt.lattice is not None:
        lattice = read_lattice(config.corpus_dir / utt.lattice)
    d = decoder_features(trellis, lattice, best).d
    return UtteranceVector(a, c, d)


def run_extract(config: RunConfig) -> Path:
    _require(config.manifest, "corpus manifest")
    _require(config.model_path("acoustic"), "acoustic checkpoint")
    _require(config.model_path("char"), "char checkpoint")
    grammar_path = config.corpus_dir / "grammar.json"
    _require(grammar_path, "decoder grammar")
    corpus = load_corpus(config.manifest)
    acoustic = load_model(config.model_path("acoustic"))
    char_model = load_model(config.model_path("char"))
    table = _char_table(config)
    grammar = load_grammar(grammar_path)
    rows = [(utt.id, extract_utterance(config, utt, acoustic, char_model, table, grammar)) for utt in corpus]
    write_feature_rows(rows, config.features_path)
    write_snapshot(config, config.root / "resolved_config.json")
    return config.features_path


def requested_masks(config: RunConfig, mask: str | None = None) -> list[tuple[str, ...]]:
    chosen = mask if mask is not None else config.mask
    if chosen == "all":
        return list(TABLE_MASKS)
    return [parse_mask(part) for part in chosen.split("+")]


def run_train_fusion(config: RunConfig, mask: str | None = None) -> dict:
    """Train one classification layer per mask on the training split and score the test split."""
    if not config.features_path.exists():
        raise PipelineError(f"features file not found: {config.features_path} (run extract first)")
    train, test = load_split(config)
    features = dict(read_feature_rows(config.features_path))
    missing = [u.id for u in train + test if u.id not in features]
    if missing:
        raise PipelineError(f"features missing for {len(missing)} utterance(s), e.g. {missing[0]}")
    seed = _stage_seed(config, _SEED_FUSION)
    results = {}
    for m in requested_masks(config, mask):
        name = mask_name(m)
        model = train_fusion(
            [(features[u.id], u.label) for u in train],
            m,
            config.fusion.train.to_train_config(seed),
            config.fusion.hidden_dims,
        )
        save_fusion(model, config.model_path(f"fusion_{name}"))
        scores = [(u.id, classify(model, features[u.id]), int(u.label)) for u in test]
        write_scores(scores, config.scores_path(name))
        results[name] = eer_from_curve(det_curve(ScoreSet.from_pairs((s, l) for _, s, l in scores)))
        log.info("mask %s test EER %.4f", mask_label(m), results[name])
    write_snapshot(config, config.root / "resolved_config.json")
    return results


def run_eval(config: RunConfig, normal_deviate: bool = False) -> str:
    """EER table in ablation-table row order over whichever runs have scores."""
    runs = {}
    for m in TABLE_MASKS:
        path = config.scores_path(mask_name(m))
        if path.exists():
            runs[m] = read_scores(path)
        else:
            log.warning("no scores for mask %s (%s)", mask_label(m), path)
    if not runs:
        raise PipelineError(f"no score files found under {config.root / 'scores'}")
    config.eval_dir.mkdir(parents=True, exist_ok=True)
    curves = {}
    lines = [f"{'features':<12}  EER(%)"]
    for m, rows in runs.items():
        curve = det_curve(ScoreSet.from_pairs((s, l) for _, s, l in rows))
        curves[mask_label(m)] = curve
        write_det_csv(curve, config.eval_dir / f"det_{mask_name(m)}.csv")
        lines.append(f"{mask_label(m):<12}  {100 * eer_from_curve(curve):6.2f}")
    table = "\n".join(lines)
    report = table
    if len(runs) >= 2:
        comparison = compare_runs({mask_label(m): rows for m, rows in runs.items()})
        full = mask_label(("a", "c", "d"))
        if full in curves:
            dominated = [b for (a, b), dom in sorted(comparison.dominates.items()) if a == full and dom]
            report += f"\n\n{full} dominates at every fpr grid point: {', '.join(dominated) or 'none'}"
    (config.eval_dir / "eer_table.txt").write_text(report + "\n", encoding="utf-8")
    (config.eval_dir / "det.svg").write_text(det_svg(curves, normal_deviate), encoding="utf-8")
    write_snapshot(config, config.root / "resolved_config.json")
    return report
