use fseval_core::dataset::{
    parse_accuracy_records, parse_accuracy_records_str, parse_corpus, parse_corpus_str, records_to_csv,
    write_accuracy_records, AccuracyRecord, CorpusFormat,
};
use fseval_core::Error;
use proptest::prelude::*;

const HEADER: &str = "lm_type,task_id,subsample_index,m,n,correct_base,correct_extra,correct_test\n";

fn record(lm: &str, task: &str, k: u32, n: u32, counts: [u32; 3]) -> AccuracyRecord {
    AccuracyRecord {
        lm_type: lm.into(),
        task_id: task.into(),
        subsample_index: k,
        m: 100,
        n,
        correct_base: counts[0],
        correct_extra: counts[1],
        correct_test: counts[2],
    }
}

#[test]
fn corpus_csv_three_rows_in_order() {
    let input = "doc_id,label,text\nd1,pos,\"good, really\"\nd2,neg,bad\nd3,pos,fine\n";
    let (corpus, report) = parse_corpus_str(input, CorpusFormat::Csv).unwrap();
    let ids: Vec<_> = corpus.documents().iter().map(|d| d.doc_id.as_str()).collect();
    assert_eq!(ids, ["d1", "d2", "d3"]);
    assert_eq!(corpus.documents()[0].text, "good, really");
    assert_eq!(report.rows_read, 3);
    assert_eq!(report.rows_rejected, 0);
}

#[test]
fn corpus_row_without_label_is_rejected() {
    let input = "doc_id,label,text\nd1,pos,a\nd2,,b\nd3,neg,c\n";
    let (corpus, report) = parse_corpus_str(input, CorpusFormat::Csv).unwrap();
    assert_eq!(corpus.len(), 2);
    assert_eq!(report.rows_rejected, 1);
    assert_eq!(report.rejection_reasons[0].row, 2);
    assert_eq!(report.rejection_reasons[0].reason, "missing label");
}

#[test]
fn corpus_with_one_label_is_degenerate() {
    let input = "doc_id,label,text\nd1,pos,a\nd2,pos,b\n";
    assert!(matches!(
        parse_corpus_str(input, CorpusFormat::Csv),
        Err(Error::DegenerateCorpus(l)) if l == "pos"
    ));
}

#[test]
fn corpus_with_no_valid_rows_is_empty() {
    let input = "doc_id,label,text\n,pos,a\nd2,,b\n";
    assert!(matches!(
        parse_corpus_str(input, CorpusFormat::Csv),
        Err(Error::EmptyCorpus)
    ));
}

#[test]
fn corpus_duplicate_id_keeps_first() {
    let input = "doc_id,label,text\nd1,pos,a\nd1,neg,b\nd2,neg,c\n";
    let (corpus, report) = parse_corpus_str(input, CorpusFormat::Csv).unwrap();
    assert_eq!(corpus.get("d1").unwrap().label, "pos");
    assert_eq!(report.rows_rejected, 1);
}

#[test]
fn corpus_jsonl_file_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.jsonl");
    std::fs::write(
        &path,
        "{\"doc_id\":\"a\",\"label\":\"x\",\"text\":\"t1\"}\nnot json\n{\"doc_id\":\"b\",\"label\":\"y\",\"text\":\"\"}\n",
    )
    .unwrap();
    assert_eq!(CorpusFormat::from_path(&path), Some(CorpusFormat::Jsonl));
    let (corpus, report) = parse_corpus(&path, CorpusFormat::Jsonl).unwrap();
    assert_eq!(corpus.len(), 2);
    assert_eq!(report.rows_rejected, 1);
    assert_eq!(corpus.get("b").unwrap().text, "");
}

#[test]
fn accuracy_valid_row_accepted() {
    let input = format!("{HEADER}lm0,sst2,0,100,200,150,160,170\n");
    let (recs, report) = parse_accuracy_records_str(&input).unwrap();
    assert_eq!(recs, vec![record("lm0", "sst2", 0, 200, [150, 160, 170])]);
    assert_eq!(report.rows_rejected, 0);
}

#[test]
fn accuracy_count_above_n_rejected() {
    let input = format!("{HEADER}lm0,sst2,0,100,200,201,160,170\n");
    let (recs, report) = parse_accuracy_records_str(&input).unwrap();
    assert!(recs.is_empty());
    assert_eq!(report.rows_rejected, 1);
    assert!(report.rejection_reasons[0].reason.contains("exceeds n"));
}

#[test]
fn accuracy_duplicate_key_keeps_first() {
    let input = format!("{HEADER}lm0,t,3,100,200,1,2,3\nlm0,t,3,100,200,4,5,6\nlm1,t,3,100,200,4,5,6\n");
    let (recs, report) = parse_accuracy_records_str(&input).unwrap();
    assert_eq!(recs.len(), 2);
    assert_eq!(recs[0].correct_base, 1);
    assert_eq!(report.rejection_reasons[0].row, 2);
    assert_eq!(report.rejection_reasons[0].reason, "duplicate key");
}

#[test]
fn accuracy_bad_integer_is_row_level() {
    let input = format!("{HEADER}lm0,t,0,100,200,x,2,3\nlm0,t,1,100,200,1,2,3\nlm0,t,2,100,200\n");
    let (recs, report) = parse_accuracy_records_str(&input).unwrap();
    assert_eq!(recs.len(), 1);
    assert_eq!(report.rows_read, 3);
    assert_eq!(report.rows_rejected, 2);
}

#[test]
fn accuracy_wrong_header_is_an_error() {
    let input = "lm,task,k,m,n,a,b,c\n";
    assert!(matches!(parse_accuracy_records_str(input), Err(Error::Invalid(_))));
}

#[test]
fn empty_record_list_writes_header_only() {
    assert_eq!(records_to_csv(&[]).unwrap(), HEADER.as_bytes());
}

#[test]
fn writer_refuses_invalid_records() {
    let dir = tempfile::tempdir().unwrap();
    let bad = record("lm0", "t", 0, 10, [11, 0, 0]);
    assert!(write_accuracy_records(&[bad], &dir.path().join("r.csv")).is_err());
}

#[test]
fn ten_thousand_records_rewrite_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let recs: Vec<AccuracyRecord> = (0..10_000u32)
        .map(|i| {
            let n = [50, 100, 200, 500][(i % 4) as usize];
            record(
                &format!("lm{}", i % 3),
                &format!("task,\"{}\"", i / 300),
                i,
                n,
                [i % (n + 1), (i * 7) % (n + 1), (i * 13) % (n + 1)],
            )
        })
        .collect();
    let first = dir.path().join("a.csv");
    let second = dir.path().join("b.csv");
    write_accuracy_records(&recs, &first).unwrap();
    let (back, report) = parse_accuracy_records(&first).unwrap();
    assert_eq!(report.rows_rejected, 0);
    assert_eq!(back, recs);
    write_accuracy_records(&back, &second).unwrap();
    assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());
}

fn arb_record() -> impl Strategy<Value = AccuracyRecord> {
    (
        "[a-z0-9_]{1,6}",
        "[a-zA-Z0-9 ,\"]{1,10}",
        0u32..1000,
        1u32..600,
        1u32..600,
    )
        .prop_flat_map(|(lm, task, k, m, n)| {
            (0..=n, 0..=n, 0..=n).prop_map(move |(a, b, c)| AccuracyRecord {
                lm_type: lm.clone(),
                task_id: task.clone(),
                subsample_index: k,
                m,
                n,
                correct_base: a,
                correct_extra: b,
                correct_test: c,
            })
        })
}

proptest! {
    #[test]
    fn parse_inverts_write(recs in proptest::collection::vec(arb_record(), 0..40)) {
        let mut seen = std::collections::HashSet::new();
        let recs: Vec<_> = recs.into_iter().filter(|r| seen.insert(r.key())).collect();
        let bytes = records_to_csv(&recs).unwrap();
        let (back, report) = parse_accuracy_records_str(std::str::from_utf8(&bytes).unwrap()).unwrap();
        prop_assert_eq!(report.rows_rejected, 0);
        prop_assert_eq!(&back, &recs);
        prop_assert_eq!(records_to_csv(&back).unwrap(), bytes);
    }

    #[test]
    fn accepted_plus_rejected_is_rows_read(rows in proptest::collection::vec((0u32..5, 0u32..300, 0u32..300), 0..30)) {
        let mut input = String::from(HEADER);
        for (k, n, c) in &rows {
            input.push_str(&format!("lm,t,{k},10,{n},{c},0,0\n"));
        }
        let (recs, report) = parse_accuracy_records_str(&input).unwrap();
        prop_assert_eq!(report.rows_read, rows.len());
        prop_assert_eq!(recs.len() + report.rows_rejected, rows.len());
        prop_assert!(recs.iter().all(|r| r.n >= 1 && r.correct_base <= r.n));
    }
}
