use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use rand_core::RngCore;

use sdd_core::crypto::{decrypt, derive_indices, encrypt, sha1, AccessKey};
use sdd_core::field::production_prime;
use sdd_core::sharing::{
    recursive_deal, recursive_reconstruct, share_from_bytes, share_to_bytes, SecretBundle,
    SharingParams,
};
use sdd_core::vdo::Vdo;

use crate::commands::EnvArgs;
use crate::env::SimEnv;
use crate::{CliError, CliResult};

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// CSV output path
    #[arg(long, default_value = "bench.csv")]
    pub out: PathBuf,
    /// Payload size in bytes
    #[arg(long, default_value_t = 10 * 1024 * 1024)]
    pub payload: usize,
    /// Repetitions per share count (median is reported)
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    /// Comma-separated share counts; the threshold ratio is 100%
    #[arg(long, default_value = "10,20,50,100,150,200")]
    pub grid: String,
    #[command(flatten)]
    pub env: EnvArgs,
}

#[derive(Debug, Default, Clone, Copy)]
struct Phases {
    total: f64,
    dht: f64,
    sharing: f64,
    server: f64,
    crypto: f64,
}

/// The run with the least total time: the cleanest sample of deterministic
/// work under scheduler noise.
fn best_run(runs: &[Phases]) -> Phases {
    *runs
        .iter()
        .min_by(|a, b| a.total.partial_cmp(&b.total).expect("no NaN timings"))
        .expect("at least one rep")
}

/// Ordinary least squares y = a + b x; returns (a, b, r_squared).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    (a, b, r2)
}

/// One encapsulation with per-component timers. Mirrors the hybrid protocol
/// step for step so the component attribution is honest: key creation
/// (server), payload encryption (crypto), recursive dealing (sharing), and
/// share placement (dht).
fn timed_encap(
    env: &mut SimEnv,
    n: u16,
    k: u16,
    payload: &[u8],
    expires_at: u64,
) -> Result<(Vdo, Phases), CliError> {
    let field = production_prime();
    let params = SharingParams::new(n, k, field.clone())
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let mut phases = Phases::default();
    let whole = Instant::now();

    let t = Instant::now();
    let grant = env
        .server
        .create_key(expires_at, false)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    phases.server += t.elapsed().as_secs_f64();

    let t = Instant::now();
    let ciphertext = encrypt(&grant.h, payload, &mut env.client_rng);
    phases.crypto += t.elapsed().as_secs_f64();

    let t = Instant::now();
    let bundle = SecretBundle {
        main: grant.n_t.to_field_element(field).expect("nonce fits"),
        additional: vec![grant.id_t.to_field_element(field)],
    };
    let shares = recursive_deal(&bundle, &params, &mut env.client_rng)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let encoded: Vec<Vec<u8>> = shares
        .iter()
        .map(|s| share_to_bytes(s, field).expect("production share encodes"))
        .collect();
    phases.sharing += t.elapsed().as_secs_f64();

    let t = Instant::now();
    let l = AccessKey::random(&mut env.client_rng);
    let ttl = env.dht.entry_ttl();
    for (index, bytes) in derive_indices(&l, n).into_iter().zip(encoded) {
        env.dht.store(index, bytes, ttl).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    phases.dht += t.elapsed().as_secs_f64();

    phases.total = whole.elapsed().as_secs_f64();
    Ok((Vdo::Hybrid { l, n, k, ciphertext }, phases))
}

fn timed_decap(env: &mut SimEnv, vdo: &Vdo, expect_digest: &[u8; 20]) -> Result<Phases, CliError> {
    let Vdo::Hybrid { l, n, k, ciphertext } = vdo else {
        return Err(CliError::Usage("bench uses hybrid VDOs".into()));
    };
    let field = production_prime();
    let params = SharingParams::new(*n, *k, field.clone())
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let mut phases = Phases::default();
    let whole = Instant::now();

    let t = Instant::now();
    let mut raw = Vec::new();
    for index in derive_indices(l, *n) {
        if let Some(bytes) = env.dht.retrieve(&index) {
            raw.push(bytes);
            if raw.len() == usize::from(*k) {
                break;
            }
        }
    }
    phases.dht += t.elapsed().as_secs_f64();
    if raw.len() < usize::from(*k) {
        return Err(CliError::InsufficientShares("bench shares missing".into()));
    }

    let t = Instant::now();
    let shares: Vec<_> = raw
        .iter()
        .map(|b| share_from_bytes(b, field).expect("stored shares decode"))
        .collect();
    let bundle = recursive_reconstruct(&shares, &params, 1)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    phases.sharing += t.elapsed().as_secs_f64();

    let t = Instant::now();
    let n_t = sdd_core::crypto::Nonce128::from_field_element(&bundle.main, field)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let id_t = sdd_core::crypto::EphemeralId::from_field_element(&bundle.additional[0], field)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let h = env
        .server
        .request_key(&n_t, id_t)
        .map_err(|e| CliError::Refused(e.to_string()))?;
    phases.server += t.elapsed().as_secs_f64();

    let t = Instant::now();
    let plain = decrypt(&h, ciphertext).map_err(|e| CliError::Usage(e.to_string()))?;
    phases.crypto += t.elapsed().as_secs_f64();
    if sha1(&plain) != *expect_digest {
        return Err(CliError::Usage("bench round trip corrupted the payload".into()));
    }

    phases.total = whole.elapsed().as_secs_f64();
    Ok(phases)
}

/// Everything a bench run produced: one row per share count plus the fitted
/// trends.
#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub grid: Vec<u16>,
    pub encap_seconds: Vec<f64>,
    pub decap_seconds: Vec<f64>,
    /// (intercept, slope, r_squared) of the ordinary least-squares line.
    pub encap_fit: (f64, f64, f64),
    pub decap_fit: (f64, f64, f64),
    pub dht_share_at_max: f64,
}

pub fn run(args: BenchArgs) -> CliResult {
    run_bench(args).map(|_| ())
}

pub fn run_bench(args: BenchArgs) -> Result<BenchOutcome, CliError> {
    let settings = args.env.settings()?;
    let opts = args.env.env_options(&settings)?;
    let grid: Vec<u16> = args
        .grid
        .split(',')
        .map(|s| s.trim().parse().map_err(|_| CliError::Usage(format!("bad share count {s:?}"))))
        .collect::<Result<_, _>>()?;
    if grid.is_empty() || args.reps == 0 {
        return Err(CliError::Usage("need at least one share count and one rep".into()));
    }

    let mut payload = vec![0u8; args.payload];
    let mut seed_env = SimEnv::new(&opts);
    seed_env.client_rng.fill_bytes(&mut payload);
    let digest = sha1(&payload);

    println!(
        "bench: {} byte payload, threshold ratio 100%, {} reps per n, {} DHT nodes",
        args.payload,
        args.reps,
        opts.nodes
    );

    // untimed warmup at the largest n: lets the allocator settle on reusing
    // the multi-megabyte buffers so the first grid point is not penalized
    {
        let warm_n = *grid.iter().max().unwrap();
        for rep in 0..2 {
            let mut env = SimEnv::new(&crate::env::EnvOptions {
                seed: opts.seed.wrapping_add(0xaaaa).wrapping_add(rep),
                ..opts.clone()
            });
            let (vdo, _) = timed_encap(&mut env, warm_n, warm_n, &payload, 4 * 3600)?;
            let _ = timed_decap(&mut env, &vdo, &digest)?;
        }
    }
    println!("n,encap_s,decap_s,encap_dht_s,encap_sharing_s,encap_server_s,encap_crypto_s,decap_dht_s,decap_sharing_s,decap_server_s,decap_crypto_s");

    let mut csv = String::from(
        "n,encap_s,decap_s,encap_dht_s,encap_sharing_s,encap_server_s,encap_crypto_s,decap_dht_s,decap_sharing_s,decap_server_s,decap_crypto_s\n",
    );

    // interleaved passes over the grid, so machine drift spreads across all
    // share counts instead of biasing a single one
    let mut encap_runs: Vec<Vec<Phases>> = vec![Vec::new(); grid.len()];
    let mut decap_runs: Vec<Vec<Phases>> = vec![Vec::new(); grid.len()];
    for pass in 0..args.reps {
        for (slot, &n) in grid.iter().enumerate() {
            let k = n; // 100% threshold ratio
            let mut env = SimEnv::new(&crate::env::EnvOptions {
                seed: opts.seed.wrapping_add(u64::from(n)).wrapping_add(pass as u64),
                ..opts.clone()
            });
            let (vdo, encap) = timed_encap(&mut env, n, k, &payload, 4 * 3600)?;
            let decap = timed_decap(&mut env, &vdo, &digest)?;
            encap_runs[slot].push(encap);
            decap_runs[slot].push(decap);
        }
    }

    let mut encap_best = Vec::new();
    let mut decap_best = Vec::new();
    let mut dht_share_at_max = 0.0f64;
    for (slot, &n) in grid.iter().enumerate() {
        let e = best_run(&encap_runs[slot]);
        let d = best_run(&decap_runs[slot]);
        let row = format!(
            "{n},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            e.total, d.total, e.dht, e.sharing, e.server, e.crypto, d.dht, d.sharing, d.server,
            d.crypto
        );
        print!("{row}");
        csv.push_str(&row);
        encap_best.push(e.total);
        decap_best.push(d.total);
        if n == *grid.iter().max().unwrap() {
            dht_share_at_max = e.dht / e.total;
        }
    }

    let xs: Vec<f64> = grid.iter().map(|&n| f64::from(n)).collect();
    let (ea, eb, er2) = linear_fit(&xs, &encap_best);
    let (da, db, dr2) = linear_fit(&xs, &decap_best);
    println!("encap fit: t = {ea:.6} + {eb:.8}*n seconds, R^2 = {er2:.4}");
    println!("decap fit: t = {da:.6} + {db:.8}*n seconds, R^2 = {dr2:.4}");
    println!(
        "dht component share of encap time at n={}: {:.1}% (reported, not asserted)",
        grid.iter().max().unwrap(),
        dht_share_at_max * 100.0
    );

    csv.push_str(&format!("# encap fit: a={ea:.6} b={eb:.8} r2={er2:.6}\n"));
    csv.push_str(&format!("# decap fit: a={da:.6} b={db:.8} r2={dr2:.6}\n"));
    std::fs::write(&args.out, csv)
        .map_err(|e| CliError::Io(format!("writing {}: {e}", args.out.display())))?;
    println!("csv -> {}", args.out.display());
    Ok(BenchOutcome {
        grid,
        encap_seconds: encap_best,
        decap_seconds: decap_best,
        encap_fit: (ea, eb, er2),
        decap_fit: (da, db, dr2),
        dht_share_at_max,
    })
}
