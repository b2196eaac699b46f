use proptest::prelude::*;

use code2paper::analysis::{parse_source, strip_comments_normalized, ParseStatus};
use code2paper::article::{ManuscriptDraft, ManuscriptMeta, Section, SectionId, CANONICAL_ORDER};
use code2paper::config::PipelineConfig;
use code2paper::distill::structural_similarity;
use code2paper::gateway::{MockRules, PromptRequest, TokenLedger};
use code2paper::ingest::count_lines;
use code2paper::metrics::{cohesion, compare, evaluate, readability, structure_adherence, QualityPolicy};

const VOCAB: &[&str] = &[
    "code", "paper", "tool", "model", "graph", "parser", "section", "draft", "token", "budget",
    "the", "a", "of", "readability", "simple", "structure", "function", "method", "class",
    "we", "it", "is", "and", "cohesion", "measure", "result",
];

fn sentence() -> impl Strategy<Value = String> {
    (prop::collection::vec(prop::sample::select(VOCAB), 1..12), prop::sample::select(&[".", "!", "?"][..]))
        .prop_map(|(ws, end)| {
            let mut s = ws.join(" ");
            let first = s.remove(0).to_ascii_uppercase();
            format!("{first}{s}{end}")
        })
}

fn paragraph() -> impl Strategy<Value = String> {
    prop::collection::vec(sentence(), 1..5).prop_map(|v| v.join(" "))
}

fn prose() -> impl Strategy<Value = String> {
    prop::collection::vec(paragraph(), 1..4).prop_map(|v| v.join("\n\n"))
}

fn manuscript() -> impl Strategy<Value = ManuscriptDraft> {
    (sentence(), prop::collection::vec(prose(), 6)).prop_map(|(title, mut texts)| {
        texts.insert(0, title);
        let sections: Vec<Section> = CANONICAL_ORDER
            .iter()
            .zip(texts)
            .map(|(&id, text)| Section { id, text })
            .collect();
        ManuscriptDraft {
            title: sections[0].text.clone(),
            sections,
            metadata: ManuscriptMeta::default(),
            trace: vec![],
        }
    })
}

/// A small module of functions with distinct names.
fn program() -> impl Strategy<Value = Vec<(String, usize)>> {
    prop::collection::btree_map("[a-z]{1,6}", 0usize..4, 1..6)
        .prop_map(|m| m.into_iter().map(|(n, a)| (format!("f_{n}"), a)).collect())
}

fn render(funcs: &[(String, usize)]) -> String {
    let mut out = String::new();
    for (name, arity) in funcs {
        let params: Vec<String> = (0..*arity).map(|i| format!("p{i}")).collect();
        out.push_str(&format!("def {name}({}):\n    x = 1\n    return x + {arity}\n\n", params.join(", ")));
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 128,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn readability_f32_tracks_f64(text in prose()) {
        let a = readability::<f64>(&text).unwrap();
        let b = readability::<f32>(&text).unwrap();
        prop_assert_eq!((a.words, a.sentences, a.syllables), (b.words, b.sentences, b.syllables));
        prop_assert!((a.flesch_reading_ease - f64::from(b.flesch_reading_ease)).abs() < 1e-2);
        prop_assert!((a.fk_grade - f64::from(b.fk_grade)).abs() < 1e-2);
    }

    #[test]
    fn cohesion_is_a_unit_score(text in prose()) {
        let c = cohesion::<f64>(&text).unwrap();
        prop_assert!((0.0..=1.0).contains(&c));
        let doubled = format!("{text}\n\n{text}");
        if text.split("\n\n").count() == 1 {
            prop_assert_eq!(cohesion::<f64>(&doubled).unwrap(), 1.0);
        }
    }

    #[test]
    fn removing_a_section_never_raises_structure(m in manuscript(), idx in 0usize..7) {
        let full = structure_adherence(&m, 200);
        prop_assert!((0.0..=1.0).contains(&full));
        let cut = m.without_section(CANONICAL_ORDER[idx]);
        prop_assert!(structure_adherence(&cut, 200) < full);
        let report = evaluate(&m, &QualityPolicy::default());
        prop_assert!((0.0..=1.0).contains(&report.composite));
    }

    #[test]
    fn comparison_is_antisymmetric(a in manuscript(), b in manuscript()) {
        let p = QualityPolicy::default();
        let ab = compare("a", &a, "b", &b, &p).unwrap();
        let ba = compare("b", &b, "a", &a, &p).unwrap();
        for (k, d) in &ab.per_metric_delta {
            prop_assert_eq!(*d, -ba.per_metric_delta[k]);
        }
        let aa = compare("a", &a, "a", &a, &p).unwrap();
        prop_assert!(aa.per_metric_delta.values().all(|d| *d == 0.0));
    }

    #[test]
    fn markdown_round_trips(m in manuscript()) {
        let back = ManuscriptDraft::from_markdown(&m.to_markdown());
        prop_assert_eq!(back.sections, m.sections);
    }

    #[test]
    fn comments_do_not_change_normalized_code(funcs in program(), seed in any::<u64>()) {
        let src = render(&funcs);
        let mut commented = String::new();
        for (i, line) in src.lines().enumerate() {
            let indent: String = line.chars().take_while(|c| *c == ' ').collect();
            if (seed >> (i % 64)) & 1 == 1 {
                commented.push_str(&format!("{indent}# note {i}\n"));
            }
            if !line.is_empty() && (seed >> ((i + 7) % 64)) & 1 == 1 {
                commented.push_str(&format!("{line}  # trailing\n"));
            } else {
                commented.push_str(line);
                commented.push('\n');
            }
        }
        prop_assert_eq!(strip_comments_normalized(&src), strip_comments_normalized(&commented));
        let s = parse_source(&commented, "m.py");
        prop_assert_eq!(s.parse_status, ParseStatus::Clean);
        prop_assert_eq!(s.definitions().count(), funcs.len());
    }

    #[test]
    fn renaming_changes_normalized_code(funcs in program()) {
        let src = render(&funcs);
        let renamed = src.replacen("def f_", "def g_", 1);
        prop_assert_ne!(strip_comments_normalized(&src), strip_comments_normalized(&renamed));
    }

    #[test]
    fn similarity_is_symmetric_and_bounded(a in program(), b in program()) {
        let sa = parse_source(&render(&a), "m.py");
        let sb = parse_source(&render(&b), "m.py");
        let ab = structural_similarity::<f64>(&sa, &sb).similarity;
        let ba = structural_similarity::<f64>(&sb, &sa).similarity;
        prop_assert_eq!(ab, ba);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(structural_similarity::<f64>(&sa, &sa).similarity, 1.0);
        let f32_sim = structural_similarity::<f32>(&sa, &sb).similarity;
        prop_assert!((f64::from(f32_sim) - ab).abs() < 1e-6);
    }

    #[test]
    fn parser_is_total(text in ".{0,400}") {
        let s = parse_source(&text, "x.py");
        prop_assert!((0.0..=1.0).contains(&s.comment_density));
        for u in &s.units {
            prop_assert!(u.line_span.0 <= u.line_span.1);
        }
    }

    #[test]
    fn ledger_never_overruns(budget in 0u64..500, ops in prop::collection::vec((1u64..80, 0u64..80, any::<bool>()), 0..40)) {
        let ledger = TokenLedger::new(Some(budget));
        for (reserve, actual, settle) in ops {
            if let Ok(r) = ledger.reserve(reserve) {
                if settle {
                    let p = actual.min(reserve) / 2;
                    ledger.settle(r, p, actual.min(reserve) - p);
                } else {
                    ledger.release(r);
                }
            }
            prop_assert!(ledger.used() <= budget);
        }
    }

    #[test]
    fn mock_is_pure(user in "[ -~]{1,200}", tag in prop::sample::select(&["augment", "distill", "reconstruct", "revise", "section:methods"][..])) {
        let rules = MockRules::bundled();
        let req = PromptRequest::new("s", user, 0.0, 100, tag).unwrap();
        prop_assert_eq!(rules.respond(&req), rules.respond(&req));
    }

    #[test]
    fn line_count_matches_definition(bytes in prop::collection::vec(prop::sample::select(&b"a\n "[..]), 0..200)) {
        let newlines = bytes.iter().filter(|b| **b == b'\n').count();
        let expected = newlines + usize::from(bytes.last().is_some_and(|b| *b != b'\n'));
        prop_assert_eq!(count_lines(&bytes), expected);
    }

    #[test]
    fn config_round_trips_through_toml(coh in 0.0f64..1.0, iters in 0u32..=20, budget in proptest::option::of(1u64..1_000_000)) {
        let mut c = PipelineConfig::default();
        c.quality.thresholds.cohesion = coh;
        c.revision.max_iterations = iters;
        c.backend.token_budget = budget;
        let back = PipelineConfig::from_toml(&c.to_toml()).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.digest(), c.digest());
        prop_assert!(back.validate().is_ok());
    }
}

#[test]
fn section_ids_parse_from_their_names() {
    for id in CANONICAL_ORDER {
        assert_eq!(id.as_str().parse::<SectionId>().unwrap(), id);
        assert_eq!(id.as_str().to_uppercase().parse::<SectionId>().unwrap(), id);
    }
}
