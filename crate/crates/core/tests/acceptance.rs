//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits nonzero if any failed.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use metakey::attacks::{blob_uniformity, coalition_feasibility, coalitions, collusion_matrix, Atom, Role, ToyInstance};
use metakey::crypto::{
    aont_forward, aont_inverse, block_decrypt, block_encrypt, envelope_unwrap, hash, pad, pre_decrypt, pre_encrypt,
    reencrypt, rekey, DesignationPolicy, Digest, Pseudomessage, SymKey,
};
use metakey::ledger::{Chain, MetadataRecord, Record, ShareRecord};
use metakey::netsim::{MessageKind, NodeId, Payload};
use metakey::protocol::{run_sharing_scenario, Config, ShareGrant, SharingRun};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

fn scenario(seed: u64, len: usize) -> Result<SharingRun, String> {
    run_sharing_scenario(
        &Config {
            seed,
            ..Config::default()
        },
        len,
    )
    .map_err(|e| format!("seed {seed}: {e}"))
}

fn contains(haystack: &[u8], needle: &[u8]) -> bool {
    haystack.windows(needle.len()).any(|w| w == needle)
}

fn pre_correctness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(0xacc1);
    let policies = [
        DesignationPolicy::Last,
        DesignationPolicy::FirstLast,
        DesignationPolicy::All,
    ];
    let mut total = 0;
    for policy in policies {
        for n in 0..1000 {
            let len = rng.gen_range(0..=64 * 1024);
            let mut m = vec![0u8; len];
            rng.fill_bytes(&mut m);
            let s = SymKey::generate(&mut rng);
            let s2 = SymKey::generate(&mut rng);
            let c = pre_encrypt(&s, &m, policy, &mut rng).map_err(|e| e.to_string())?;
            let rk = rekey(&s, c.nonce(), &s2, c.dset(), &mut rng).map_err(|e| e.to_string())?;
            let c2 = reencrypt(&rk, &c).map_err(|e| e.to_string())?;
            let out = pre_decrypt(&s2, &c2).map_err(|e| e.to_string())?;
            check(out == m, || format!("{} triple {n} mismatched", policy.name()))?;
            total += 1;
        }
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{total} triples over 3 policies in {:.1}s",
        elapsed.as_secs_f64()
    ))
}

fn primitive_vectors() -> Outcome {
    let h = |s: &str| hex::decode(s).unwrap();
    let key = |s: &str| SymKey::from_slice(&h(s)).unwrap();
    let aes = [
        // FIPS-197 appendix C.1
        (
            "000102030405060708090a0b0c0d0e0f",
            "00112233445566778899aabbccddeeff",
            "69c4e0d86a7b0430d8cdb78070b4c55a",
        ),
        // SP 800-38A F.1.1, blocks 1 and 2
        (
            "2b7e151628aed2a6abf7158809cf4f3c",
            "6bc1bee22e409f96e93d7e117393172a",
            "3ad77bb40d7a3660a89ecaf32466ef97",
        ),
        (
            "2b7e151628aed2a6abf7158809cf4f3c",
            "ae2d8a571e03ac9c9eb76fac45af8e51",
            "f5d3d58503b9699de785895a96fdbaaf",
        ),
        (
            "00000000000000000000000000000000",
            "00000000000000000000000000000000",
            "66e94bd4ef8a2c3b884cfa59ca342b2e",
        ),
    ];
    for (k, pt, ct) in aes {
        let got = block_encrypt(&key(k), &h(pt)).map_err(|e| e.to_string())?;
        check(got.to_vec() == h(ct), || {
            format!("AES {k}/{pt} gave {}", hex::encode(got))
        })?;
        let back = block_decrypt(&key(k), &h(ct)).map_err(|e| e.to_string())?;
        check(back.to_vec() == h(pt), || format!("AES decrypt {k}/{ct}"))?;
    }
    let sha = [
        ("", "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"),
        (
            "abc",
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad",
        ),
        (
            "abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq",
            "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1",
        ),
    ];
    for (msg, digest) in sha {
        let got = hash(msg.as_bytes()).to_hex();
        check(got == digest, || format!("SHA-256({msg:?}) gave {got}"))?;
    }
    Ok(format!("{} AES-128 and {} SHA-256 vectors", aes.len(), sha.len()))
}

fn end_to_end() -> Outcome {
    let expected = [
        MessageKind::ReencryptAndForward,
        MessageKind::TransferBlob,
        MessageKind::SafeChannel,
    ];
    for seed in 0..100 {
        let run = scenario(seed, 1 + (seed as usize * 97) % 4096)?;
        check(run.recovered == run.plaintext, || {
            format!("seed {seed}: plaintext differs")
        })?;
        let kinds: Vec<MessageKind> = run.deployment.network.trace().deliveries()[run.share_start..run.share_end]
            .iter()
            .map(|d| d.kind())
            .collect();
        check(kinds == expected, || format!("seed {seed}: share phase was {kinds:?}"))?;
    }
    Ok("100 seeded runs reproduce the plaintext with the expected share sequence".into())
}

/// Closure per coalition, worked out by hand from the initial facts
/// N1 = {BlobOrig, RK, LocN1, LocN2}, N2 = {BlobShared, LocN2},
/// Receiver = {KeySPrime, LocN2, BlobShared}.
fn hand_closure(coalition: &BTreeSet<Role>) -> BTreeSet<Atom> {
    use Atom::*;
    let has = |r| coalition.contains(&r);
    let list: &[Atom] = match (has(Role::N1), has(Role::N2), has(Role::Receiver)) {
        (true, false, false) | (true, true, false) => &[HasBlobOrig, HasRK, HasLocN1, HasLocN2, HasBlobShared],
        (false, true, false) => &[HasBlobShared, HasLocN2],
        (false, _, true) => &[HasKeySPrime, HasLocN2, HasBlobShared, KnowsPlain],
        (true, _, true) => &[
            HasBlobOrig,
            HasRK,
            HasLocN1,
            HasLocN2,
            HasBlobShared,
            HasKeySPrime,
            HasPadsOverD,
            KnowsPlain,
        ],
        (false, false, false) => &[],
    };
    list.iter().copied().collect()
}

fn collusion() -> Outcome {
    let plain_expected = [false, false, true, false, true, true, true];
    let blocked_expected = [
        None,
        None,
        None,
        Some("N1 location"),
        Some("N1 location"),
        None,
        Some("N1 location"),
    ];
    for seed in 0..20 {
        let run = scenario(seed, 256)?;
        let trace = run.deployment.network.trace();
        let reports = collusion_matrix(trace, &run.roles);
        check(reports.len() == 7, || format!("{} reports", reports.len()))?;
        for (i, r) in reports.iter().enumerate() {
            check(r.closure == hand_closure(&r.coalition), || {
                format!("seed {seed} {:?}: closure {:?}", r.coalition, r.closure)
            })?;
            check(!r.s_derivable, || format!("seed {seed} {:?}: S derivable", r.coalition))?;
            check(r.plain_derivable == plain_expected[i], || {
                format!("seed {seed} {:?}: plain_derivable = {}", r.coalition, r.plain_derivable)
            })?;
        }
        for (i, c) in coalitions().iter().enumerate() {
            let f = coalition_feasibility(trace, &run.roles, c);
            check(f.missing_link() == blocked_expected[i], || {
                format!("seed {seed} {c:?}: {f:?}")
            })?;
        }
    }
    Ok("7 coalitions over 20 runs match the hand closure; {N1,R} and {N1,N2,R} blocked on N1 location".into())
}

fn trace_secrecy() -> Outcome {
    let mut grants_seen = 0;
    for seed in 0..100 {
        let run = scenario(seed, 512)?;
        let d = &run.deployment;
        let roles = &run.roles;
        let (_, meta) = d.open_meta_key(&run.owner, &roles.file_id).map_err(|e| e.to_string())?;
        let s = meta.key.as_bytes().to_vec();
        let s_prime = run.grant.new_key.as_bytes().to_vec();

        for del in d.network.trace().deliveries() {
            let to = del.to();
            let bytes = del.message.payload.encode();
            if to == roles.receiver || to == roles.n2 {
                check(!del.message.mentioned_nodes().contains(&roles.n1), || {
                    format!("seed {seed}: delivery {} names N1", del.seq)
                })?;
            }
            check(!contains(&bytes, &s), || {
                format!("seed {seed}: S in delivery {}", del.seq)
            })?;
            check(!contains(&bytes, &s_prime), || {
                format!("seed {seed}: S' in clear in delivery {}", del.seq)
            })?;
            if let Payload::SafeChannel { sealed } = &del.message.payload {
                check(to == roles.receiver, || format!("seed {seed}: grant sent to {to}"))?;
                let opened = envelope_unwrap(&run.receiver.keypair.private, sealed).map_err(|e| e.to_string())?;
                let grant = ShareGrant::decode(&opened).map_err(|e| e.to_string())?;
                check(grant.new_key.as_bytes()[..] == s_prime[..], || {
                    format!("seed {seed}: grant key")
                })?;
                check(grant.share_location != roles.n1, || {
                    format!("seed {seed}: grant names N1")
                })?;
                grants_seen += 1;
            }
        }
        let chain = d.chain.to_bytes();
        check(!contains(&chain, &s) && !contains(&chain, &s_prime), || {
            format!("seed {seed}: key on ledger")
        })?;
    }
    check(grants_seen == 100, || format!("{grants_seen} grants"))?;
    Ok("100 runs: N1 never named to Receiver or N2, S never in clear, S' only inside the receiver's envelope".into())
}

fn build_chain(blocks: usize, rng: &mut ChaCha20Rng) -> Chain {
    let mut chain = Chain::genesis();
    let digest = |rng: &mut ChaCha20Rng| {
        let mut d = [0u8; 32];
        rng.fill_bytes(&mut d);
        Digest(d)
    };
    for h in 1..blocks as u64 {
        let mut records = vec![Record::Metadata(MetadataRecord {
            file_id: digest(rng),
            owner_id: NodeId(rng.gen_range(0..10)),
            content_hash: digest(rng),
            wrapped_key: (0..rng.gen_range(64..160)).map(|_| rng.gen()).collect(),
            created_at: h,
        })];
        if rng.gen_bool(0.5) {
            records.push(Record::Share(ShareRecord {
                file_id: digest(rng),
                owner_id: NodeId(rng.gen_range(0..10)),
                grant_hash: digest(rng),
                created_at: h,
            }));
        }
        chain.append(records, h).expect("append to fresh chain");
    }
    chain
}

fn ledger_tamper() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(0xacc6);
    let chain = build_chain(100, &mut rng);
    let bytes = chain.to_bytes();
    let mut ends = Vec::new();
    let mut off = 0;
    for b in chain.blocks() {
        off += b.canonical_bytes().len() + 32;
        ends.push(off);
    }
    check(off == bytes.len(), || {
        "block boundaries do not cover the encoding".into()
    })?;
    check(Chain::verify_bytes(&bytes).is_ok(), || "clean chain fails".into())?;

    let (mut detected, mut located) = (0, 0);
    for _ in 0..1000 {
        let bit = rng.gen_range(0..bytes.len() * 8);
        let mut t = bytes.clone();
        t[bit / 8] ^= 1 << (bit % 8);
        let k = ends.iter().position(|&e| bit / 8 < e).unwrap() as u64;
        if let Err(e) = Chain::verify_bytes(&t) {
            detected += 1;
            if e.height == k || e.height == k + 1 {
                located += 1;
            }
        }
    }
    check(detected == 1000, || format!("{detected}/1000 detected"))?;
    check(located >= 990, || format!("{located}/1000 at the right height"))?;
    Ok(format!(
        "100-block chain: {detected}/1000 flips detected, {located}/1000 at height k or k+1"
    ))
}

fn aont_avalanche() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(0xacc7);
    let mut cases = 0;
    for f in 0..100 {
        let len = rng.gen_range(1..4096);
        let mut m = vec![0u8; len];
        rng.fill_bytes(&mut m);
        let blocks = pad(&m).map_err(|e| e.to_string())?;
        let p = aont_forward(&blocks, &SymKey::generate(&mut rng)).map_err(|e| e.to_string())?;
        let s = p.len() - 1;
        for j in 0..s {
            let bit = rng.gen_range(0..128);
            let mut flipped = p.clone().into_blocks();
            flipped[j][bit / 8] ^= 1 << (bit % 8);
            let out = aont_inverse(&Pseudomessage::from_blocks(flipped).map_err(|e| e.to_string())?);
            let all_changed = out.iter().zip(&blocks).all(|(a, b)| a != b);
            check(all_changed, || format!("file {f} block {} bit {bit}", j + 1))?;
            cases += 1;
        }
    }
    Ok(format!(
        "{cases} (file, block, bit) cases over 100 files, every recovered block changed"
    ))
}

fn toy_search() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(0xacc8);
    let mut ambiguous = 0;
    for _ in 0..100 {
        let blocks = rng.gen_range(2..=32);
        let inst = ToyInstance::random(&mut rng, blocks, DesignationPolicy::Last).map_err(|e| e.to_string())?;
        let found = inst.search().map_err(|e| e.to_string())?;
        check(found.contains(&inst.s), || "true key not among candidates".into())?;
        if found.len() > 1 {
            ambiguous += 1;
        }
    }
    check(ambiguous >= 95, || format!("{ambiguous}/100 instances ambiguous"))?;
    Ok(format!("{ambiguous}/100 instances have more than one consistent key"))
}

fn uniformity() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(0xacc9);
    let zeros = vec![0u8; 1 << 20];
    let s = SymKey::generate(&mut rng);
    let s2 = SymKey::generate(&mut rng);
    let c = pre_encrypt(&s, &zeros, DesignationPolicy::Last, &mut rng).map_err(|e| e.to_string())?;
    let rk = rekey(&s, c.nonce(), &s2, c.dset(), &mut rng).map_err(|e| e.to_string())?;
    let c2 = reencrypt(&rk, &c).map_err(|e| e.to_string())?;
    let p1 = blob_uniformity(&c).map_err(|e| e.to_string())?;
    let p2 = blob_uniformity(&c2).map_err(|e| e.to_string())?;
    check(p1 > 0.001 && p2 > 0.001, || format!("p = {p1:.4}, {p2:.4}"))?;
    Ok(format!(
        "1 MiB zero plaintext: p = {p1:.4} original, {p2:.4} transformed"
    ))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outs = Vec::new();
    for i in 0..2 {
        let trace = dir.path().join(format!("trace{i}.jsonl"));
        let out = metakey::cli::run([
            "metakey",
            "demo",
            "--seed",
            "42",
            "--json-trace",
            trace.to_str().unwrap(),
        ]);
        check(out.code == 0, || out.stdout.clone())?;
        outs.push((out.stdout, std::fs::read(&trace).map_err(|e| e.to_string())?));
    }
    check(outs[0] == outs[1], || "library runs differ".into())?;

    let bin = env!("CARGO_BIN_EXE_metakey");
    let mut bin_outs = Vec::new();
    for _ in 0..2 {
        let o = std::process::Command::new(bin)
            .args(["demo", "--seed", "42"])
            .output()
            .map_err(|e| e.to_string())?;
        check(o.status.success(), || String::from_utf8_lossy(&o.stdout).into_owned())?;
        bin_outs.push(o.stdout);
    }
    check(bin_outs[0] == bin_outs[1], || "binary runs differ".into())?;
    check(bin_outs[0] == outs[0].0.as_bytes(), || {
        "binary and library differ".into()
    })?;
    Ok(format!(
        "demo --seed 42: {} byte dump identical across runs",
        bin_outs[0].len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("proxy re-encryption correctness", pre_correctness),
        ("primitive test vectors", primitive_vectors),
        ("end-to-end sharing flow", end_to_end),
        ("collusion matrix and feasibility", collusion),
        ("trace secrecy", trace_secrecy),
        ("ledger tamper evidence", ledger_tamper),
        ("all-or-nothing avalanche", aont_avalanche),
        ("toy key non-identifiability", toy_search),
        ("ciphertext uniformity", uniformity),
        ("demo determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
