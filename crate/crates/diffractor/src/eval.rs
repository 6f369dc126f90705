//! Plausible-deniability statistics.
//!
//! For a sampled word, `n_w` estimates the probability the word comes back
//! unperturbed and `s_w` counts the distinct outputs observed over the
//! trials. `expected_n_w` is the closed-form counterpart computed from the
//! exact mechanism PMFs, used to validate the Monte Carlo path.

use std::collections::HashSet;
use std::io::Write;

use crate::diffract::Diffractor;
use crate::error::{Error, Result};
use crate::rng::SeedStream;

/// Per-word deniability estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct DeniabilityStats {
    pub word: String,
    pub epsilon: f64,
    pub trials: usize,
    /// Fraction of trials returning the word itself.
    pub n_w: f64,
    /// Number of distinct outputs observed.
    pub s_w: usize,
}

/// Sample means over the evaluated words.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeniabilityAggregate {
    pub mean_n_w: f64,
    pub mean_s_w: f64,
    pub words: usize,
    pub trials: usize,
}

/// Estimate deniability over `sample_size` words drawn uniformly (without
/// replacement) from the union of the bank's vocabularies, perturbing each
/// word `trials` times.
///
/// Trial RNG streams are derived from `(word position, trial)` under the
/// diffractor's master seed, so two runs over mechanisms sharing a seed are
/// coupled draw-for-draw ("matched seeds").
pub fn estimate_deniability(
    diffractor: &Diffractor,
    sample_size: usize,
    trials: usize,
    sample_seed: u64,
) -> Result<(Vec<DeniabilityStats>, DeniabilityAggregate)> {
    if sample_size == 0 || trials == 0 {
        return Err(Error::Contract("sample_size and trials must be positive".into()));
    }
    let union = diffractor.bank().vocabulary_union();
    if union.is_empty() {
        return Err(Error::Contract("bank vocabularies are empty".into()));
    }
    let mut pick_rng = SeedStream::new(sample_seed).root();
    let k = sample_size.min(union.len());
    let picks = rand::seq::index::sample(&mut pick_rng, union.len(), k);

    let seeds = diffractor.seeds();
    let epsilon = diffractor.mechanism().epsilon;
    let mut rows = Vec::with_capacity(k);
    for (w, word_pos) in picks.into_iter().enumerate() {
        let word = union[word_pos];
        let mut identical = 0usize;
        let mut distinct: HashSet<String> = HashSet::new();
        for t in 0..trials {
            let mut rng = seeds.rng(w as u64, t as u64);
            let rec = diffractor.perturb_word(word, &mut rng);
            if rec.output == word {
                identical += 1;
            }
            distinct.insert(rec.output);
        }
        rows.push(DeniabilityStats {
            word: word.to_string(),
            epsilon,
            trials,
            n_w: identical as f64 / trials as f64,
            s_w: distinct.len(),
        });
    }
    let agg = DeniabilityAggregate {
        mean_n_w: rows.iter().map(|r| r.n_w).sum::<f64>() / rows.len() as f64,
        mean_s_w: rows.iter().map(|r| r.s_w as f64).sum::<f64>() / rows.len() as f64,
        words: rows.len(),
        trials,
    };
    Ok((rows, agg))
}

/// Exact probability that `word` is returned unchanged: the uniform mixture,
/// over the lists containing the word, of each list's identity-output mass.
/// (No other index can produce the same surface form: list tokens are
/// unique.)
pub fn expected_n_w(diffractor: &Diffractor, word: &str) -> Result<f64> {
    let mut masses = Vec::new();
    for list in diffractor.bank().lists() {
        if let Some(idx) = list.index_of(word) {
            let pmf = diffractor.mechanism().exact_pmf(idx, list.len())?;
            masses.push(pmf[idx]);
        }
    }
    if masses.is_empty() {
        return Err(Error::Membership(word.into()));
    }
    Ok(masses.iter().sum::<f64>() / masses.len() as f64)
}

pub const DENIABILITY_CSV_HEADER: &str = "word,epsilon,mechanism,config,trials,n_w,s_w";

/// Write rows in the fixed schema `word,epsilon,mechanism,config,trials,n_w,s_w`.
pub fn write_deniability_csv<W: Write>(
    out: W,
    rows: &[DeniabilityStats],
    mechanism: &str,
    config: &str,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DENIABILITY_CSV_HEADER.split(','))
        .map_err(|e| Error::Format(format!("csv write failed: {e}")))?;
    for r in rows {
        w.write_record([
            r.word.as_str(),
            &r.epsilon.to_string(),
            mechanism,
            config,
            &r.trials.to_string(),
            &r.n_w.to_string(),
            &r.s_w.to_string(),
        ])
        .map_err(|e| Error::Format(format!("csv write failed: {e}")))?;
    }
    w.flush().map_err(|e| Error::Format(format!("csv flush failed: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffract::{ConfigTag, ListBank};
    use crate::list::WordList;
    use crate::mechanisms::MechanismConfig;

    fn list(source: &str, words: &[&str]) -> WordList {
        WordList::from_words(source, words.iter().map(|s| s.to_string()).collect()).unwrap()
    }

    fn diffractor(lists: Vec<WordList>, epsilon: f64, seed: u64) -> Diffractor {
        Diffractor::new(
            MechanismConfig::geometric(epsilon, seed).unwrap(),
            ListBank::new(lists, ConfigTag::Custom).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn huge_epsilon_keeps_words_unperturbed() {
        let d = diffractor(vec![list("m", &["a", "b", "c", "d", "e", "f"])], 50.0, 1);
        let (_, agg) = estimate_deniability(&d, 6, 50, 3).unwrap();
        assert!(agg.mean_n_w >= 0.95, "{}", agg.mean_n_w);
    }

    #[test]
    fn degenerate_single_word_bank() {
        let only = WordList::from_words("m", vec!["lonely".into()]).unwrap();
        for eps in [0.1, 3.0] {
            let d = diffractor(vec![only.clone()], eps, 1);
            let (rows, agg) = estimate_deniability(&d, 4, 30, 2).unwrap();
            assert_eq!(rows.len(), 1);
            assert_eq!(rows[0].n_w, 1.0);
            assert_eq!(rows[0].s_w, 1);
            assert_eq!(agg.mean_n_w, 1.0);
            assert_eq!(expected_n_w(&d, "lonely").unwrap(), 1.0);
        }
    }

    #[test]
    fn single_trial_means_support_one() {
        let d = diffractor(vec![list("m", &["a", "b", "c", "d"])], 0.5, 2);
        let (rows, _) = estimate_deniability(&d, 4, 1, 3).unwrap();
        assert!(rows.iter().all(|r| r.s_w == 1));
    }

    #[test]
    fn stats_bounds_hold() {
        let d = diffractor(vec![list("m", &["a", "b", "c", "d", "e"])], 0.5, 2);
        let (rows, agg) = estimate_deniability(&d, 5, 40, 3).unwrap();
        for r in &rows {
            assert!(r.s_w >= 1 && r.s_w <= r.trials);
            let count = r.n_w * r.trials as f64;
            assert!((count - count.round()).abs() < 1e-9);
            assert!(count <= r.trials as f64);
        }
        assert_eq!(agg.words, 5);
    }

    #[test]
    fn expected_n_w_interior_index_is_noise_mass_at_zero() {
        // 21 words, word at the center: truncation plays no visible role and
        // the identity mass is (e^eps - 1)/(e^eps + 1).
        let words: Vec<String> = (0..21).map(|i| format!("w{i:02}")).collect();
        let refs: Vec<&str> = words.iter().map(|s| s.as_str()).collect();
        let eps = 1.0;
        let d = diffractor(vec![list("m", &refs)], eps, 4);
        let got = expected_n_w(&d, "w10").unwrap();
        let c = (eps.exp() - 1.0) / (eps.exp() + 1.0);
        assert!((got - c).abs() < 1e-12);
    }

    #[test]
    fn expected_n_w_boundary_includes_clamped_tail() {
        let words: Vec<String> = (0..50).map(|i| format!("w{i:02}")).collect();
        let refs: Vec<&str> = words.iter().map(|s| s.as_str()).collect();
        let eps = 1.0;
        let d = diffractor(vec![list("m", &refs)], eps, 4);
        let got = expected_n_w(&d, "w00").unwrap();
        // mass at zero plus the whole left tail folded onto index 0
        let q = (-eps).exp();
        let c = (1.0 - q) / (1.0 + q);
        let want = c + c * q / (1.0 - q);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn expected_n_w_matches_monte_carlo() {
        let d = diffractor(
            vec![list("m1", &["a", "b", "c", "d", "e"]), list("m2", &["e", "c", "a", "b", "d"])],
            1.0,
            6,
        );
        let want = expected_n_w(&d, "c").unwrap();
        let n = 100_000usize;
        let seeds = d.seeds();
        let mut hits = 0usize;
        for t in 0..n {
            let mut rng = seeds.rng(0, t as u64);
            if d.perturb_word("c", &mut rng).output == "c" {
                hits += 1;
            }
        }
        let got = hits as f64 / n as f64;
        let se = (want * (1.0 - want) / n as f64).sqrt();
        assert!((got - want).abs() <= 4.0 * se, "{got} vs {want}");
    }

    #[test]
    fn expected_n_w_oov_is_membership_error() {
        let d = diffractor(vec![list("m", &["a", "b"])], 1.0, 0);
        assert!(expected_n_w(&d, "zzz").is_err());
    }

    #[test]
    fn csv_schema_is_stable() {
        let rows = vec![DeniabilityStats {
            word: "a,b".into(),
            epsilon: 1.0,
            trials: 10,
            n_w: 0.4,
            s_w: 3,
        }];
        let mut buf = Vec::new();
        write_deniability_csv(&mut buf, &rows, "geometric", "L0").unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), DENIABILITY_CSV_HEADER);
        // the comma-bearing word must be quoted
        assert_eq!(lines.next().unwrap(), "\"a,b\",1,geometric,L0,10,0.4,3");
    }
}
