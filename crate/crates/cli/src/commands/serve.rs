use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use clap::Args;

use crate::commands::EnvArgs;
use crate::config::parse_duration;
use crate::env::SimEnv;
use crate::wire;
use crate::{CliError, CliResult};

#[derive(Args, Debug)]
pub struct ServeArgs {
    /// Listen address (port 0 picks a free port; the bound address is
    /// printed on startup)
    #[arg(long, default_value = "127.0.0.1:4040")]
    pub addr: String,
    /// Virtual seconds per wall-clock second (0 freezes the clock)
    #[arg(long)]
    pub time_scale: Option<f64>,
    /// Also write the key server's own snapshot file here on save
    #[arg(long)]
    pub snapshot: Option<PathBuf>,
    /// Exit gracefully after this much wall time (useful for scripting)
    #[arg(long)]
    pub exit_after: Option<String>,
    #[command(flatten)]
    pub env: EnvArgs,
}

fn save_all(env: &SimEnv, state: &PathBuf, snapshot: &Option<PathBuf>) -> Result<(), CliError> {
    env.save(state)?;
    if let Some(path) = snapshot {
        std::fs::write(path, env.server.snapshot_bytes())
            .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))?;
    }
    Ok(())
}

fn handle_connection(stream: TcpStream, env: &Arc<Mutex<SimEnv>>, running: &Arc<AtomicBool>) {
    let _ = stream.set_nonblocking(false);
    let mut writer = match stream.try_clone() {
        Ok(w) => w,
        Err(_) => return,
    };
    let reader = BufReader::new(stream);
    for line in reader.lines() {
        if !running.load(Ordering::Relaxed) {
            break;
        }
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        let response = {
            let mut env = env.lock().expect("server state lock");
            wire::handle_frame(&mut env, &line)
        };
        if writeln!(writer, "{response}").and_then(|_| writer.flush()).is_err() {
            break;
        }
    }
}

pub fn run(args: ServeArgs) -> CliResult {
    let settings = args.env.settings()?;
    let opts = args.env.env_options(&settings)?;
    let time_scale = args
        .time_scale
        .or(settings.str("time_scale").and_then(|s| s.parse().ok()))
        .unwrap_or(1.0);
    let exit_after = args.exit_after.as_deref().map(parse_duration).transpose()?;

    let env = SimEnv::load_or_create(&args.env.state, &opts)?;
    let listener = TcpListener::bind(&args.addr)
        .map_err(|e| CliError::Io(format!("binding {}: {e}", args.addr)))?;
    listener.set_nonblocking(true)?;
    let local = listener.local_addr()?;
    println!("listening on {local} (time-scale {time_scale}, state {})", args.env.state.display());

    let env = Arc::new(Mutex::new(env));
    let running = Arc::new(AtomicBool::new(true));
    {
        let running = running.clone();
        // second Ctrl-C kills the process the default way
        let _ = ctrlc::set_handler(move || running.store(false, Ordering::Relaxed));
    }

    // wall clock -> virtual clock mapping plus the periodic expiry sweep
    let sweeper = {
        let env = env.clone();
        let running = running.clone();
        let state = args.env.state.clone();
        let snapshot = args.snapshot.clone();
        std::thread::spawn(move || {
            let started = Instant::now();
            let base_virtual = env.lock().unwrap().now();
            let mut last_save = Instant::now();
            while running.load(Ordering::Relaxed) {
                std::thread::sleep(Duration::from_millis(100));
                let target = base_virtual + (started.elapsed().as_secs_f64() * time_scale) as u64;
                let mut guard = env.lock().unwrap();
                let now = guard.now();
                if target > now {
                    guard.advance(target - now);
                }
                if last_save.elapsed() > Duration::from_secs(10) {
                    let _ = save_all(&guard, &state, &snapshot);
                    last_save = Instant::now();
                }
            }
        })
    };

    let deadline = exit_after.map(|secs| Instant::now() + Duration::from_secs(secs));
    let mut handlers = Vec::new();
    while running.load(Ordering::Relaxed) {
        if let Some(d) = deadline {
            if Instant::now() >= d {
                running.store(false, Ordering::Relaxed);
                break;
            }
        }
        match listener.accept() {
            Ok((stream, _)) => {
                let env = env.clone();
                let running = running.clone();
                handlers.push(std::thread::spawn(move || {
                    handle_connection(stream, &env, &running);
                }));
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                std::thread::sleep(Duration::from_millis(25));
            }
            Err(_) => break,
        }
    }

    running.store(false, Ordering::Relaxed);
    let _ = sweeper.join();
    let guard = env.lock().expect("server state lock");
    save_all(&guard, &args.env.state, &args.snapshot)?;
    println!("shut down; state saved to {}", args.env.state.display());
    Ok(())
}
