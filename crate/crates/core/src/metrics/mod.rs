//! ROUGE-1/2/L (precision, recall, F1), their mean, and corpus-level BLEU.
//!
//! Metric tokenization is lowercase + punctuation detachment + whitespace
//! split — the word tokenizer's rule — so baseline and model outputs are
//! scored identically.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenizer::{normalize, word_tokenize};

/// Precision/recall/F1 triple in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub p: f64,
    pub r: f64,
    pub f: f64,
}

impl RougeScore {
    fn from_pr(p: f64, r: f64) -> Self {
        let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        Self { p, r, f }
    }

    const ZERO: RougeScore = RougeScore {
        p: 0.0,
        r: 0.0,
        f: 0.0,
    };
}

/// Tokens used for all scoring.
pub fn metric_tokenize(text: &str) -> Vec<String> {
    word_tokenize(&normalize(text))
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// Clipped n-gram overlap: match count per distinct n-gram is
/// `min(count_candidate, count_reference)`.
pub fn rouge_n(candidate: &[String], reference: &[String], n: usize) -> RougeScore {
    assert!(n >= 1, "rouge_n needs n >= 1");
    let cand = ngram_counts(candidate, n);
    let refr = ngram_counts(reference, n);
    let cand_total: usize = cand.values().sum();
    let ref_total: usize = refr.values().sum();
    if cand_total == 0 || ref_total == 0 {
        return RougeScore::ZERO;
    }
    let matched: usize = cand
        .iter()
        .map(|(gram, &c)| c.min(refr.get(gram).copied().unwrap_or(0)))
        .sum();
    RougeScore::from_pr(matched as f64 / cand_total as f64, matched as f64 / ref_total as f64)
}

/// Longest-common-subsequence length by dynamic programming.
fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut row = vec![0usize; b.len() + 1];
    for ai in a {
        for (j, bj) in b.iter().enumerate() {
            row[j + 1] = if ai == bj {
                prev[j] + 1
            } else {
                prev[j + 1].max(row[j])
            };
        }
        std::mem::swap(&mut prev, &mut row);
    }
    prev[b.len()]
}

/// LCS-based ROUGE with plain harmonic F (beta = 1).
pub fn rouge_l(candidate: &[String], reference: &[String]) -> RougeScore {
    if candidate.is_empty() || reference.is_empty() {
        return RougeScore::ZERO;
    }
    let l = lcs_len(candidate, reference) as f64;
    RougeScore::from_pr(l / candidate.len() as f64, l / reference.len() as f64)
}

/// The headline metric: arithmetic mean of the three F1 scores.
pub fn r_mean_f(r1: RougeScore, r2: RougeScore, rl: RougeScore) -> f64 {
    (r1.f + r2.f + rl.f) / 3.0
}

/// Corpus-level BLEU-4 in [0, 100]: geometric mean of clipped modified
/// n-gram precisions aggregated over the corpus, times the brevity penalty
/// `exp(min(0, 1 - ref_len/cand_len))`. No smoothing: any zero aggregate
/// precision zeroes the score. Orders for which even the longest candidate
/// is too short are left out of the mean.
pub fn bleu(candidates: &[Vec<String>], references: &[Vec<String>]) -> Result<f64> {
    if candidates.len() != references.len() {
        return Err(Error::MisalignedFiles {
            predictions: candidates.len(),
            references: references.len(),
        });
    }
    if candidates.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let max_cand_len = candidates.iter().map(Vec::len).max().unwrap_or(0);
    let mut cand_len_total = 0usize;
    let mut ref_len_total = 0usize;
    let mut matched = [0usize; 4];
    let mut total = [0usize; 4];
    for (cand, refr) in candidates.iter().zip(references) {
        cand_len_total += cand.len();
        ref_len_total += refr.len();
        for n in 1..=4usize {
            let c = ngram_counts(cand, n);
            let r = ngram_counts(refr, n);
            total[n - 1] += c.values().sum::<usize>();
            matched[n - 1] += c
                .iter()
                .map(|(gram, &cnt)| cnt.min(r.get(gram).copied().unwrap_or(0)))
                .sum::<usize>();
        }
    }

    let mut log_sum = 0.0;
    let mut orders = 0usize;
    for n in 1..=4usize {
        if max_cand_len < n {
            continue;
        }
        orders += 1;
        if total[n - 1] == 0 || matched[n - 1] == 0 {
            return Ok(0.0);
        }
        log_sum += (matched[n - 1] as f64 / total[n - 1] as f64).ln();
    }
    if orders == 0 || cand_len_total == 0 {
        return Ok(0.0);
    }
    let precision_mean = (log_sum / orders as f64).exp();
    let bp = (1.0 - ref_len_total as f64 / cand_len_total as f64).min(0.0).exp();
    Ok(100.0 * bp * precision_mean)
}

/// Per-example scores plus corpus aggregates. The serialized form follows
/// the report schema exactly; per-example scores stay in memory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub rouge1: RougeScore,
    pub rouge2: RougeScore,
    #[serde(rename = "rougeL")]
    pub rouge_l: RougeScore,
    pub r_mean_f: f64,
    pub bleu: f64,
    pub n_examples: usize,
    #[serde(skip)]
    pub per_example: Vec<ExampleScores>,
}

#[derive(Debug, Clone, Copy)]
pub struct ExampleScores {
    pub rouge1: RougeScore,
    pub rouge2: RougeScore,
    pub rouge_l: RougeScore,
}

/// Scores aligned prediction/reference line pairs: per-example ROUGE with
/// corpus means, the mean-F aggregate, and corpus BLEU.
pub fn evaluate_lines(predictions: &[String], references: &[String]) -> Result<EvalReport> {
    if predictions.len() != references.len() {
        return Err(Error::MisalignedFiles {
            predictions: predictions.len(),
            references: references.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let cand_tokens: Vec<Vec<String>> = predictions.iter().map(|s| metric_tokenize(s)).collect();
    let ref_tokens: Vec<Vec<String>> = references.iter().map(|s| metric_tokenize(s)).collect();

    let per_example: Vec<ExampleScores> = cand_tokens
        .iter()
        .zip(&ref_tokens)
        .map(|(c, r)| ExampleScores {
            rouge1: rouge_n(c, r, 1),
            rouge2: rouge_n(c, r, 2),
            rouge_l: rouge_l(c, r),
        })
        .collect();

    let mean = |pick: fn(&ExampleScores) -> RougeScore| -> RougeScore {
        let n = per_example.len() as f64;
        let mut acc = (0.0, 0.0, 0.0);
        for s in &per_example {
            let sc = pick(s);
            acc = (acc.0 + sc.p, acc.1 + sc.r, acc.2 + sc.f);
        }
        RougeScore {
            p: acc.0 / n,
            r: acc.1 / n,
            f: acc.2 / n,
        }
    };
    let rouge1 = mean(|s| s.rouge1);
    let rouge2 = mean(|s| s.rouge2);
    let rouge_l_mean = mean(|s| s.rouge_l);

    Ok(EvalReport {
        rouge1,
        rouge2,
        rouge_l: rouge_l_mean,
        r_mean_f: r_mean_f(rouge1, rouge2, rouge_l_mean),
        bleu: bleu(&cand_tokens, &ref_tokens)?,
        n_examples: per_example.len(),
        per_example,
    })
}

/// Reads predictions (plain text, one headline per line) and references
/// (JSONL with a "title" field, or plain text) and scores them.
pub fn evaluate_corpus(predictions_path: &Path, references_path: &Path) -> Result<EvalReport> {
    let predictions = read_lines(predictions_path)?;
    let references = if references_path.extension().is_some_and(|e| e == "jsonl") {
        crate::corpus::load_jsonl(references_path)?
            .into_iter()
            .map(|d| d.title)
            .collect()
    } else {
        read_lines(references_path)?
    };
    evaluate_lines(&predictions, &references)
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(text.lines().map(|l| l.to_string()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        metric_tokenize(s)
    }

    #[test]
    fn identical_sequences_score_one() {
        let t = toks("по данным агентства матч завершился");
        for n in 1..=2 {
            let s = rouge_n(&t, &t, n);
            assert_eq!((s.p, s.r, s.f), (1.0, 1.0, 1.0));
        }
        let l = rouge_l(&t, &t);
        assert_eq!((l.p, l.r, l.f), (1.0, 1.0, 1.0));
    }

    #[test]
    fn cat_sat_ate_hand_counts() {
        let cand = toks("the cat sat");
        let refr = toks("the cat ate");
        let r1 = rouge_n(&cand, &refr, 1);
        assert!((r1.p - 2.0 / 3.0).abs() < 1e-9);
        assert!((r1.r - 2.0 / 3.0).abs() < 1e-9);
        assert!((r1.f - 2.0 / 3.0).abs() < 1e-9);
        let r2 = rouge_n(&cand, &refr, 2);
        assert!((r2.p - 0.5).abs() < 1e-9);
        assert!((r2.f - 0.5).abs() < 1e-9);
    }

    #[test]
    fn clipping_limits_repeated_grams() {
        let cand = toks("the the the");
        let refr = toks("the cat");
        let r1 = rouge_n(&cand, &refr, 1);
        assert!((r1.p - 1.0 / 3.0).abs() < 1e-9);
        assert!((r1.r - 0.5).abs() < 1e-9);
    }

    #[test]
    fn disjoint_sequences_score_zero() {
        let cand = toks("a b c");
        let refr = toks("x y z");
        assert_eq!(rouge_n(&cand, &refr, 1), RougeScore::ZERO);
        assert_eq!(rouge_l(&cand, &refr), RougeScore::ZERO);
    }

    #[test]
    fn rouge_l_cat_sat_ate() {
        let cand = toks("the cat sat");
        let refr = toks("the cat ate");
        let l = rouge_l(&cand, &refr);
        assert!((l.p - 2.0 / 3.0).abs() < 1e-9);
        assert!((l.r - 2.0 / 3.0).abs() < 1e-9);
        assert!((l.f - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn reversed_distinct_sequence_has_lcs_one() {
        let cand = toks("a b c d");
        let refr = toks("d c b a");
        let l = rouge_l(&cand, &refr);
        assert!((l.p - 0.25).abs() < 1e-9);
    }

    #[test]
    fn r_mean_f_reproduces_reported_aggregates() {
        // Two published rows of (R-1-f, R-2-f, R-L-f) -> R-mean-f.
        let row = |a: f64, b: f64, c: f64| {
            let s = |f: f64| RougeScore { p: 0.0, r: 0.0, f };
            r_mean_f(s(a / 100.0), s(b / 100.0), s(c / 100.0)) * 100.0
        };
        assert!((row(41.61, 24.46, 38.85) - 34.97).abs() < 0.005);
        assert!((row(24.08, 10.57, 16.70) - 17.12).abs() < 0.005);
        let one = RougeScore {
            p: 1.0,
            r: 1.0,
            f: 1.0,
        };
        assert_eq!(r_mean_f(one, one, one), 1.0);
    }

    #[test]
    fn bleu_identity_is_100() {
        let corpus: Vec<Vec<String>> = vec![
            toks("матч завершился вничью"),
            toks("переговоры продолжатся завтра утром"),
        ];
        let score = bleu(&corpus, &corpus).unwrap();
        assert!((score - 100.0).abs() < 1e-9);
    }

    #[test]
    fn bleu_short_pair_matches_hand_evaluation() {
        // cand "the cat", ref "the cat sat": p1 = p2 = 1, orders 3 and 4
        // are impossible at candidate length 2 and drop out; the score is
        // the brevity penalty exp(1 - 3/2) alone.
        let score = bleu(&[toks("the cat")], &[toks("the cat sat")]).unwrap();
        assert!((score - 60.653065971263345).abs() < 1e-9, "{score}");
    }

    #[test]
    fn bleu_with_no_overlap_is_zero() {
        let score = bleu(&[toks("a b c d")], &[toks("w x y z")]).unwrap();
        assert_eq!(score, 0.0);
    }

    #[test]
    fn bleu_rejects_mismatched_lengths() {
        assert!(matches!(
            bleu(&[toks("a")], &[]),
            Err(Error::MisalignedFiles { .. })
        ));
    }

    #[test]
    fn perfect_predictions_give_unit_report() {
        let lines: Vec<String> = vec![
            "судьи огласили вердикт".to_string(),
            "клуб выиграл финал лиги".to_string(),
        ];
        let report = evaluate_lines(&lines, &lines).unwrap();
        assert_eq!(report.r_mean_f, 1.0);
        assert!((report.bleu - 100.0).abs() < 1e-9);
        assert_eq!(report.n_examples, 2);
    }

    #[test]
    fn empty_prediction_line_scores_zero_but_counts() {
        let preds = vec!["".to_string(), "точный заголовок".to_string()];
        let refs = vec!["точный заголовок".to_string(), "точный заголовок".to_string()];
        let report = evaluate_lines(&preds, &refs).unwrap();
        assert_eq!(report.per_example[0].rouge1, RougeScore::ZERO);
        assert_eq!(report.per_example[1].rouge1.f, 1.0);
        assert!((report.rouge1.f - 0.5).abs() < 1e-9);
        assert_eq!(report.n_examples, 2);
    }

    #[test]
    fn report_serializes_with_schema_field_names() {
        let lines = vec!["a b".to_string()];
        let report = evaluate_lines(&lines, &lines).unwrap();
        let json = serde_json::to_value(&report).unwrap();
        for key in ["rouge1", "rouge2", "rougeL", "r_mean_f", "bleu", "n_examples"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        assert!(json["rouge1"].get("p").is_some());
        assert!(json["rouge1"].get("r").is_some());
        assert!(json["rouge1"].get("f").is_some());
    }

    /// All-subsequence LCS oracle, exponential and only for short inputs.
    fn brute_force_lcs(a: &[String], b: &[String]) -> usize {
        fn subsequences(xs: &[String]) -> Vec<Vec<String>> {
            let mut out = vec![Vec::new()];
            for x in xs {
                let mut extended: Vec<Vec<String>> = out
                    .iter()
                    .map(|s| {
                        let mut s = s.clone();
                        s.push(x.clone());
                        s
                    })
                    .collect();
                out.append(&mut extended);
            }
            out
        }
        let subs_b: std::collections::HashSet<Vec<String>> =
            subsequences(b).into_iter().collect();
        subsequences(a)
            .into_iter()
            .filter(|s| subs_b.contains(s))
            .map(|s| s.len())
            .max()
            .unwrap_or(0)
    }

    #[test]
    fn lcs_matches_brute_force_on_short_random_pairs() {
        let mut rng = crate::rng::Rng::seed_from(12);
        let alphabet = ["a", "b", "c", "d"];
        for _ in 0..60 {
            let len_a = rng.below(9);
            let len_b = rng.below(9);
            let seq = |rng: &mut crate::rng::Rng, n: usize| -> Vec<String> {
                (0..n).map(|_| alphabet[rng.below(4)].to_string()).collect()
            };
            let a = seq(&mut rng, len_a);
            let b = seq(&mut rng, len_b);
            assert_eq!(lcs_len(&a, &b), brute_force_lcs(&a, &b), "{a:?} vs {b:?}");
        }
    }

    fn token_vec() -> impl proptest::strategy::Strategy<Value = Vec<String>> {
        proptest::collection::vec(
            proptest::sample::select(vec!["a", "b", "c", "d", "e"]),
            0..12,
        )
        .prop_map(|v| v.into_iter().map(str::to_string).collect())
    }

    use proptest::prelude::Strategy;

    proptest::proptest! {
        #[test]
        fn rouge_scores_are_bounded((cand, refr) in (token_vec(), token_vec())) {
            for score in [rouge_n(&cand, &refr, 1), rouge_n(&cand, &refr, 2), rouge_l(&cand, &refr)] {
                proptest::prop_assert!((0.0..=1.0).contains(&score.p));
                proptest::prop_assert!((0.0..=1.0).contains(&score.r));
                proptest::prop_assert!(score.f <= score.p.max(score.r) + 1e-12);
                proptest::prop_assert_eq!(score.f == 0.0, score.p == 0.0 || score.r == 0.0);
            }
        }

        #[test]
        fn appending_unmatched_reference_token_never_raises_recall(
            (cand, refr) in (token_vec(), token_vec())
        ) {
            // "z" never occurs in candidates drawn from a..e.
            let mut extended = refr.clone();
            extended.push("z".to_string());
            for n in 1..=2usize {
                let before = rouge_n(&cand, &refr, n).r;
                let after = rouge_n(&cand, &extended, n).r;
                proptest::prop_assert!(after <= before + 1e-12);
            }
        }

        #[test]
        fn r_mean_f_is_monotone((a, b, c, bump) in (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..0.5)) {
            let s = |f: f64| RougeScore { p: 0.0, r: 0.0, f };
            let base = r_mean_f(s(a), s(b), s(c));
            let raised = r_mean_f(s((a + bump).min(1.0)), s(b), s(c));
            proptest::prop_assert!(raised >= base);
        }
    }

    #[test]
    fn symmetry_swaps_precision_and_recall() {
        let a = toks("глава банка ушёл в отставку");
        let b = toks("банка нет");
        for n in 1..=2 {
            let fwd = rouge_n(&a, &b, n);
            let rev = rouge_n(&b, &a, n);
            assert_eq!(fwd.p, rev.r);
            assert_eq!(fwd.r, rev.p);
            assert_eq!(fwd.f, rev.f);
        }
        let fwd = rouge_l(&a, &b);
        let rev = rouge_l(&b, &a);
        assert_eq!(fwd.p, rev.r);
        assert_eq!(fwd.f, rev.f);
    }
}
