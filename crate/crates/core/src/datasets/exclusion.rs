//! Leaves out answers that are copied verbatim from the document.

use std::collections::HashSet;

use super::IngestionStats;
use crate::model::{nfc, Granularity, TaskRecord, UnitKey};

/// Lowercase, whitespace collapsed and trimmed, final `.`, `!` or `?` run
/// removed.
pub fn normalize_for_exclusion(text: &str) -> String {
    let lower = nfc(text).to_lowercase();
    let collapsed = lower.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed.trim_end_matches(['.', '!', '?']).trim_end().to_string()
}

/// Per-answer records are dropped when any answer sentence matches an
/// evidence sentence; per-sentence records lose the gold entry of each
/// matching sentence, which is marked excluded, and are dropped once every
/// sentence is excluded.
pub fn apply_exclusions(records: Vec<TaskRecord>) -> (Vec<TaskRecord>, IngestionStats) {
    let mut stats = IngestionStats { records_in: records.len(), ..IngestionStats::default() };
    let mut out = Vec::with_capacity(records.len());
    for mut record in records {
        let evidence: HashSet<String> = record.evidence.iter().map(|e| normalize_for_exclusion(&e.text)).collect();
        let matching: Vec<usize> = record
            .answer_parts
            .iter()
            .filter(|p| evidence.contains(&normalize_for_exclusion(&p.text)))
            .map(|p| p.index)
            .collect();
        match record.granularity {
            Granularity::PerAnswer if !matching.is_empty() => {
                stats.excluded_exact_match += 1;
                continue;
            }
            Granularity::PerAnswer => {}
            Granularity::PerSentence => {
                for i in matching {
                    if record.excluded_keys.insert(UnitKey::Part(i)) {
                        stats.excluded_parts += 1;
                    }
                    record.gold.retain(|g| g.unit_key != UnitKey::Part(i));
                }
                if record.evaluated_keys().is_empty() {
                    stats.excluded_exact_match += 1;
                    continue;
                }
            }
        }
        out.push(record);
    }
    stats.records_out = out.len();
    (out, stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AnswerPart, EvidenceSentence, GoldEntry, Question};

    fn record(granularity: Granularity, parts: &[&str], evidence: &[&str]) -> TaskRecord {
        let gold = match granularity {
            Granularity::PerAnswer => vec![GoldEntry { unit_key: UnitKey::WholeAnswer, evidence_indices: [0].into() }],
            Granularity::PerSentence => (0..parts.len())
                .map(|i| GoldEntry { unit_key: UnitKey::Part(i), evidence_indices: [0].into() })
                .collect(),
        };
        TaskRecord {
            id: "r".into(),
            dataset: "d".into(),
            granularity,
            question: Question::new("q", "Q?"),
            answer_parts: AnswerPart::answer(parts),
            evidence: EvidenceSentence::document(evidence),
            gold,
            excluded_keys: Default::default(),
        }
    }

    #[test]
    fn normalization_pairs() {
        // each pair was checked by hand to be equal under the stated rule
        let equal = [
            ("The cat sat.", "The cat sat"),
            ("  The   cat\tsat. ", "the cat sat."),
            ("Cafe\u{301} open!", "Café open"),
        ];
        for (a, b) in equal {
            assert_eq!(normalize_for_exclusion(a), normalize_for_exclusion(b), "{a:?} vs {b:?}");
        }
        let different = [("The cat sat.", "The cat, sat."), ("U.S.", "U.S"), ("cat sat", "cat sat down")];
        let (a, b) = different[0];
        assert_ne!(normalize_for_exclusion(a), normalize_for_exclusion(b));
        // only the trailing run is removed
        assert_eq!(normalize_for_exclusion(different[1].0), "u.s");
        assert_ne!(normalize_for_exclusion(different[2].0), normalize_for_exclusion(different[2].1));
    }

    #[test]
    fn byte_equal_answer_excludes_per_answer_record() {
        let mut ev: Vec<String> = (0..13).map(|i| format!("Evidence {i}.")).collect();
        ev[12] = "BiLSTM with attention.".into();
        let ev: Vec<&str> = ev.iter().map(String::as_str).collect();
        let (out, stats) = apply_exclusions(vec![record(Granularity::PerAnswer, &["BiLSTM with attention."], &ev)]);
        assert!(out.is_empty());
        assert_eq!(stats.excluded_exact_match, 1);
        assert!(stats.is_conserved());
    }

    #[test]
    fn trailing_period_difference_still_excluded() {
        let (out, _) = apply_exclusions(vec![record(Granularity::PerAnswer, &["BiLSTM with attention"], &["BiLSTM with attention."])]);
        assert!(out.is_empty());
    }

    #[test]
    fn per_sentence_part_is_marked() {
        let r = record(Granularity::PerSentence, &["Copied sentence.", "Original claim."], &["Copied sentence.", "X."]);
        let (out, stats) = apply_exclusions(vec![r]);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].evaluated_keys(), vec![UnitKey::Part(1)]);
        assert!(out[0].gold_for(UnitKey::Part(0)).is_none());
        assert_eq!(out[0].answer_parts.len(), 2);
        assert_eq!((stats.excluded_parts, stats.excluded_exact_match), (1, 0));

        let (again, stats) = apply_exclusions(out.clone());
        assert_eq!(again, out);
        assert_eq!(stats.excluded_parts, 0);
    }

    #[test]
    fn fully_copied_per_sentence_record_is_dropped() {
        let r = record(Granularity::PerSentence, &["A b."], &["A b."]);
        let (out, stats) = apply_exclusions(vec![r]);
        assert!(out.is_empty());
        assert_eq!(stats.excluded_exact_match, 1);
        assert!(stats.is_conserved());
    }

    #[test]
    fn no_matches_no_change() {
        let rs = vec![record(Granularity::PerAnswer, &["New."], &["Old."]), record(Granularity::PerSentence, &["New."], &["Old."])];
        let (out, stats) = apply_exclusions(rs.clone());
        assert_eq!(out, rs);
        assert_eq!(stats.excluded_exact_match, 0);
    }
}
