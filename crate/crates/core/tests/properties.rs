//! Property tests over chunking, metrics and embeddings.

use std::collections::BTreeSet;

use fbrank::corpus::{chunk_document, chunk_id, doc_of_chunk, Document};
use fbrank::embedding::{cosine, embed, vscore, vscore_from_cosine, HashingEmbedder};
use fbrank::eval::{hit_at_n, recall};
use proptest::prelude::*;

fn body() -> impl Strategy<Value = String> {
    let word = "[a-z]{1,12}";
    let sentence = prop::collection::vec(word, 1..25).prop_map(|w| format!("{}.", w.join(" ")));
    let para = prop::collection::vec(sentence, 1..6).prop_map(|s| s.join(" "));
    prop::collection::vec(para, 1..6).prop_map(|p| p.join("\n\n"))
}

fn dense(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).collect()
}

proptest! {
    #[test]
    fn chunks_cover_the_body_in_order(body in body(), max in 5usize..400) {
        let doc = Document { doc_id: "d".into(), title: "T".into(), body: body.clone(), version: 1 };
        let chunks = chunk_document(&doc, max).unwrap();
        prop_assert!(!chunks.is_empty());
        let joined: String = chunks.iter().map(|c| c.content.as_str()).collect();
        prop_assert_eq!(dense(&joined), dense(&body));
        let mut cursor = 0;
        for (i, c) in chunks.iter().enumerate() {
            prop_assert!(c.content.chars().count() <= max);
            prop_assert_eq!(c.content_length, c.content.chars().count());
            prop_assert_eq!(c.content.trim(), c.content.as_str());
            prop_assert_eq!(c.ordinal, i);
            prop_assert_eq!(&c.chunk_id, &chunk_id("d", i));
            prop_assert_eq!(doc_of_chunk(&c.chunk_id), "d");
            let at = body[cursor..].find(&c.content).map(|p| p + cursor);
            prop_assert!(at.is_some(), "chunk {} is not a slice after the previous one", i);
            cursor = at.unwrap() + c.content.len();
        }
    }

    #[test]
    fn recall_and_hit_are_monotone_in_depth(
        golden in prop::collection::btree_set(0u8..20, 1..5),
        retrieved in prop::collection::vec(0u8..20, 0..20),
    ) {
        let golden: BTreeSet<String> = golden.iter().map(|g| g.to_string()).collect();
        let retrieved: Vec<String> = retrieved.iter().map(|r| r.to_string()).collect();
        let mut prev = (0.0, 0u8);
        for k in 0..=retrieved.len() + 1 {
            let r = recall(&golden, &retrieved, k).unwrap();
            let h = hit_at_n(&golden, &retrieved, k).unwrap();
            prop_assert!((0.0..=1.0).contains(&r));
            prop_assert!(r >= prev.0 && h >= prev.1);
            prop_assert_eq!(h == 1, r > 0.0);
            prev = (r, h);
        }
    }

    #[test]
    fn embeddings_are_unit_and_vscore_bounded(a in "[a-z ]{1,60}", b in "[a-z ]{1,60}") {
        prop_assume!(!a.trim().is_empty() && !b.trim().is_empty());
        let e = HashingEmbedder::default();
        let (ea, eb) = (embed(&e, &a).unwrap(), embed(&e, &b).unwrap());
        prop_assert!((ea.norm() - 1.0).abs() < 1e-9);
        let v = vscore(&ea, &eb).unwrap();
        prop_assert!((1.0 / 3.0 - 1e-12..=1.0 + 1e-12).contains(&v));
        prop_assert!((v - vscore(&eb, &ea).unwrap()).abs() < 1e-12);
        prop_assert!((v - vscore_from_cosine(cosine(&ea, &eb).unwrap())).abs() < 1e-12);
        prop_assert!((vscore(&ea, &ea).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn vscore_is_increasing_in_cosine(x in -1.0f64..1.0, y in -1.0f64..1.0) {
        prop_assume!(x < y);
        prop_assert!(vscore_from_cosine(x) < vscore_from_cosine(y));
    }
}
