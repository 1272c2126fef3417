use super::*;
use rand::{Rng, SeedableRng};

const LEVELS: [SecurityLevel; 2] = [SecurityLevel::Test, SecurityLevel::Standard];

fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

fn day_id(root: &str, day: u64) -> IdentityPath {
    IdentityPath::day(root, DayIndex(day)).unwrap()
}

#[test]
fn setup_tags() {
    let mut rng = rng(1);
    assert_eq!(setup(SecurityLevel::Test, &mut rng).0.scheme_id(), "transparent-v1");
    let (mpp, msk) = setup(SecurityLevel::Standard, &mut rng);
    assert_eq!(mpp.scheme_id(), PAIRING_SCHEME);
    assert_eq!(msk.scheme_id(), PAIRING_SCHEME);
    assert_eq!(mpp.level_bound(), 2);
}

#[test]
fn setup_is_fresh() {
    let mut rng = rng(2);
    for level in LEVELS {
        let (_, a) = setup(level, &mut rng);
        let (_, b) = setup(level, &mut rng);
        assert_ne!(a.to_text(), b.to_text());
    }
}

#[test]
fn identity_validation() {
    assert!(matches!(IdentityPath::root(""), Err(AhibeError::Identity(_))));
    assert!(IdentityPath::root(&"x".repeat(256)).is_ok());
    assert!(IdentityPath::root(&"x".repeat(257)).is_err());
    assert!(IdentityPath::root("a/day:1").is_err());
    assert_eq!(day_id("a1", 2).canonical_text(), "a1/day:2");
    assert_ne!(day_id("a1", 2).canonical_text(), day_id("a", 12).canonical_text());
    assert_eq!(IdentityPath::root("h").unwrap().level(), 1);
    let mut rng = rng(3);
    let (_, msk) = setup(SecurityLevel::Test, &mut rng);
    assert!(matches!(extract(&msk, "", &mut rng), Err(AhibeError::Identity(_))));
}

#[test]
fn delegation_round_trip_both_schemes() {
    for level in LEVELS {
        let mut rng = rng(4);
        let (mpp, msk) = setup(level, &mut rng);
        let alice = extract(&msk, "alice", &mut rng).unwrap();
        let bob = extract(&msk, "bob", &mut rng).unwrap();
        let dk = alice.delegate(DayIndex(7), &mut rng);
        assert_eq!(dk.identity(), &day_id("alice", 7));

        let (header, key) = encap(&mpp, &day_id("alice", 7), &mut rng).unwrap();
        assert_eq!(decap(&dk, &header).unwrap(), key);

        // Another day or another holder yields a key AEAD rejects.
        let sealed = crypto::seal(&key, b"doc", b"ad", &mut rng);
        let (next_header, next_key) = encap(&mpp, &day_id("alice", 8), &mut rng).unwrap();
        let sealed_next = crypto::seal(&next_key, b"doc", b"ad", &mut rng);
        assert!(crypto::open(&sealed_next, &decap(&dk, &next_header).unwrap(), b"ad").is_err());
        let bob_dk = bob.delegate(DayIndex(7), &mut rng);
        assert!(crypto::open(&sealed, &decap(&bob_dk, &header).unwrap(), b"ad").is_err());

        // Delegating twice gives interchangeable keys.
        let again = alice.delegate(DayIndex(7), &mut rng);
        assert_eq!(decap(&again, &header).unwrap(), key);

        // Two extractions for the same root are interchangeable.
        let alice2 = extract(&msk, "alice", &mut rng).unwrap();
        assert_eq!(decap(&alice2.delegate(DayIndex(7), &mut rng), &header).unwrap(), key);
    }
}

#[test]
fn encap_requires_level_two() {
    let mut rng = rng(5);
    for level in LEVELS {
        let (mpp, _) = setup(level, &mut rng);
        let root = IdentityPath::root("alice").unwrap();
        assert_eq!(
            encap(&mpp, &root, &mut rng).unwrap_err(),
            AhibeError::Level { expected: 2, actual: 1 }
        );
        assert!(det_encap(&mpp, &root, b"x").is_err());
    }
}

#[test]
fn encap_is_randomized_det_encap_is_not() {
    let mut rng = rng(6);
    for level in LEVELS {
        let (mpp, msk) = setup(level, &mut rng);
        let id = day_id("carol", 3);
        let (h1, _) = encap(&mpp, &id, &mut rng).unwrap();
        let (h2, _) = encap(&mpp, &id, &mut rng).unwrap();
        assert_ne!(h1, h2);

        let binding = [0x42u8; 32];
        let (d1, k1) = det_encap(&mpp, &id, &binding).unwrap();
        let (d2, k2) = det_encap(&mpp, &id, &binding).unwrap();
        assert_eq!(d1.canonical_bytes(), d2.canonical_bytes());
        assert_eq!(k1, k2);

        let mut flipped = binding;
        flipped[31] ^= 1;
        assert_ne!(det_encap(&mpp, &id, &flipped).unwrap().0, d1);

        let dk = extract(&msk, "carol", &mut rng).unwrap().delegate(DayIndex(3), &mut rng);
        assert_eq!(decap(&dk, &d1).unwrap(), k1);
    }
}

#[test]
fn probe_key_examples() {
    for level in LEVELS {
        let mut rng = rng(7);
        let (mpp, msk) = setup(level, &mut rng);
        let h = extract(&msk, "h", &mut rng).unwrap();
        let other = extract(&msk, "h2", &mut rng).unwrap();
        let id = day_id("h", 20);
        assert!(probe_key(&mpp, &id, &h.delegate(DayIndex(20), &mut rng), &mut rng));
        assert!(!probe_key(&mpp, &id, &h.delegate(DayIndex(21), &mut rng), &mut rng));
        assert!(!probe_key(&mpp, &id, &other.delegate(DayIndex(20), &mut rng), &mut rng));
        assert!(!probe_key(&mpp, &IdentityPath::root("h").unwrap(), &h.delegate(DayIndex(20), &mut rng), &mut rng));
    }
}

#[test]
fn scheme_mismatch_is_a_decode_error() {
    let mut rng = rng(8);
    let (test_mpp, _) = setup(SecurityLevel::Test, &mut rng);
    let (_, msk) = setup(SecurityLevel::Standard, &mut rng);
    let dk = extract(&msk, "x", &mut rng).unwrap().delegate(DayIndex(1), &mut rng);
    let (header, _) = encap(&test_mpp, &day_id("x", 1), &mut rng).unwrap();
    assert!(matches!(decap(&dk, &header), Err(AhibeError::SchemeMismatch { .. })));
}

#[test]
fn correctness_over_random_identities() {
    for (level, cases) in [(SecurityLevel::Test, 200), (SecurityLevel::Standard, 200)] {
        let mut rng = rng(9);
        let (mpp, msk) = setup(level, &mut rng);
        for i in 0u32..cases {
            let root = format!("holder-{}", rng.gen::<u32>());
            let day = DayIndex(rng.gen_range(0..100_000));
            let hk = extract(&msk, &root, &mut rng).unwrap();
            let dk = hk.delegate(day, &mut rng);
            let id = IdentityPath::day(&root, day).unwrap();
            let (header, key) = encap(&mpp, &id, &mut rng).unwrap();
            assert_eq!(decap(&dk, &header).unwrap(), key, "case {i}");
            let (header, key) = det_encap(&mpp, &id, &i.to_be_bytes()).unwrap();
            assert_eq!(decap(&dk, &header).unwrap(), key, "det case {i}");
        }
    }
}

#[test]
fn headers_carry_no_identity_text() {
    for level in LEVELS {
        let mut rng = rng(10);
        let (mpp, _) = setup(level, &mut rng);
        let mut lengths = std::collections::HashSet::new();
        for i in 0..1_000 {
            let root = format!("identity-{i:04}");
            let id = IdentityPath::day(&root, DayIndex(i)).unwrap();
            let (header, _) = if i % 2 == 0 {
                encap(&mpp, &id, &mut rng).unwrap()
            } else {
                det_encap(&mpp, &id, b"binding").unwrap()
            };
            let text = header.to_text();
            lengths.insert(text.len());
            assert!(!text.contains(&root));
            assert!(!text.contains(&id.canonical_text()));
            let raw = &header.body;
            assert!(!raw.windows(root.len()).any(|w| w == root.as_bytes()));
            assert!(text.split('.').count() == 2);
        }
        assert_eq!(lengths.len(), 1, "header length must not depend on identity");
    }
}

#[test]
fn det_encap_injective_on_bindings() {
    let mut rng = rng(11);
    let (mpp, _) = setup(SecurityLevel::Test, &mut rng);
    let id = day_id("root", 1);
    let headers: std::collections::HashSet<_> =
        (0u32..10_000).map(|i| det_encap(&mpp, &id, &i.to_be_bytes()).unwrap().0).collect();
    assert_eq!(headers.len(), 10_000);
}

#[test]
fn det_encap_injective_on_bindings_pairing() {
    let mut rng = rng(12);
    let (mpp, _) = setup(SecurityLevel::Standard, &mut rng);
    let id = day_id("root", 1);
    let headers: std::collections::HashSet<_> =
        (0u32..500).map(|i| det_encap(&mpp, &id, &i.to_be_bytes()).unwrap().0).collect();
    assert_eq!(headers.len(), 500);
}

#[test]
fn text_forms_round_trip() {
    let mut rng = rng(13);
    for level in LEVELS {
        let (mpp, msk) = setup(level, &mut rng);
        let hk = extract(&msk, "dave", &mut rng).unwrap();
        let dk = hk.delegate(DayIndex(4), &mut rng);
        let (header, key) = encap(&mpp, &day_id("dave", 4), &mut rng).unwrap();

        let mpp2 = MasterPublicParams::from_text(&mpp.to_text()).unwrap();
        let msk2 = MasterSecret::from_text(&msk.to_text()).unwrap();
        let hk2 = HolderKey::from_text(&hk.to_text()).unwrap();
        let dk2 = DayKey::from_text(&dk.to_text()).unwrap();
        let header2 = EncapHeader::from_text(&header.to_text()).unwrap();
        assert!(mpp2 == mpp && msk2 == msk && hk2 == hk && dk2 == dk && header2 == header);
        assert!(mpp.to_text().starts_with(mpp.scheme_id()));
        assert_eq!(decap(&dk2, &header2).unwrap(), key);
        assert!(DayKey::from_text("nope.AAAA.AAAA.AAAA").is_err());
        assert!(HolderKey::from_text(&dk.to_text()).is_err());
    }
}
