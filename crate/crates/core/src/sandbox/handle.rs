use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::os::unix::fs::PermissionsExt;
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use tempfile::TempDir;

use super::parse::{excerpt, parse_test_output};
use super::*;
use crate::git::Repo;
use crate::history::BugSpec;

/// The complete environment a sandboxed command sees.
pub const ENV_ALLOWLIST: &[&str] =
    &["PATH", "HOME", "LANG", "LC_ALL", "TZ", "TERM", "SANDBOX_WORKTREE", "SANDBOX_META"];

const SYSTEM_PATH: &str = "/usr/local/sbin:/usr/local/bin:/usr/sbin:/usr/bin:/sbin:/bin";
pub(crate) const CONTAINER_WORKTREE: &str = "/workspace";
const CONTAINER_BIN: &str = "/sandbox/bin";
const CONTAINER_META: &str = "/sandbox/meta";

/// Tree hash of a directory's current contents (ignored files excluded),
/// computed with a private index so the directory's own index is untouched.
pub fn tree_hash(dir: &Path) -> Result<String, SandboxError> {
    let scratch = TempDir::new()?;
    let index = scratch.path().join("index");
    let index = index.to_string_lossy();
    let repo = Repo::open(dir);
    let env = [("GIT_INDEX_FILE", index.as_ref())];
    repo.run_raw_env(&env, &["add", "-A", "--", "."])?;
    let out = repo.run_raw_env(&env, &["write-tree"])?;
    Ok(String::from_utf8_lossy(&out.stdout).trim().to_string())
}

pub fn container_run_argv(runtime: &str, image: &str, worktree: &Path, bin: &Path, meta: &Path) -> Vec<String> {
    let mount = |host: &Path, guest: &str, ro: bool| {
        format!("{}:{guest}{}", host.display(), if ro { ":ro" } else { "" })
    };
    vec![
        runtime.to_string(),
        "run".into(),
        "-d".into(),
        "--network".into(),
        "none".into(),
        "-v".into(),
        mount(worktree, CONTAINER_WORKTREE, false),
        "-v".into(),
        mount(bin, CONTAINER_BIN, true),
        "-v".into(),
        mount(meta, CONTAINER_META, false),
        "-w".into(),
        CONTAINER_WORKTREE.into(),
        image.to_string(),
        "sleep".into(),
        "infinity".into(),
    ]
}

pub fn container_exec_argv(runtime: &str, container: &str, env: &[(String, String)], command: &str) -> Vec<String> {
    let mut argv = vec![runtime.to_string(), "exec".into(), "-w".into(), CONTAINER_WORKTREE.into()];
    for (k, v) in env {
        argv.push("-e".into());
        argv.push(format!("{k}={v}"));
    }
    argv.extend([container.to_string(), "bash".into(), "--noprofile".into(), "--norc".into(), "-c".into()]);
    argv.push(command.to_string());
    argv
}

fn write_script(path: &Path, body: &str) -> std::io::Result<()> {
    fs::write(path, body)?;
    fs::set_permissions(path, fs::Permissions::from_mode(0o755))
}

fn install_wrappers(bin: &Path, adapter: &ProjectAdapter) -> std::io::Result<()> {
    write_script(
        &bin.join(COMPILE_WRAPPER),
        &format!("#!/bin/sh\ncd \"$SANDBOX_WORKTREE\" || exit 1\n{}\n", adapter.compile_command),
    )?;
    write_script(
        &bin.join(TEST_WRAPPER),
        &format!(
            "#!/bin/sh\n\
             cd \"$SANDBOX_WORKTREE\" || exit 1\n\
             : > \"$SANDBOX_META/test.started\"\n\
             rm -f \"$SANDBOX_META/test.out\"\n\
             {{ {} ; }} > \"$SANDBOX_META/test.partial\" 2>&1\n\
             code=$?\n\
             cat \"$SANDBOX_META/test.partial\"\n\
             mv \"$SANDBOX_META/test.partial\" \"$SANDBOX_META/test.out\"\n\
             exit $code\n",
            adapter.test_command
        ),
    )
}

fn read_pipe(mut pipe: impl Read + Send + 'static) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = pipe.read_to_end(&mut buf);
        String::from_utf8_lossy(&buf).into_owned()
    })
}

/// Run `cmd` in its own process group, killing the whole group on timeout
/// and after exit so stray background jobs cannot hold the pipes open.
fn run_captured(mut cmd: Command, timeout: Duration) -> std::io::Result<CommandResult> {
    cmd.stdin(Stdio::null()).stdout(Stdio::piped()).stderr(Stdio::piped()).process_group(0);
    let start = Instant::now();
    let mut child = cmd.spawn()?;
    let pgid = child.id() as libc::pid_t;
    let out = read_pipe(child.stdout.take().expect("stdout piped"));
    let err = read_pipe(child.stderr.take().expect("stderr piped"));
    let mut timed_out = false;
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break status;
        }
        if start.elapsed() >= timeout {
            timed_out = true;
            unsafe { libc::killpg(pgid, libc::SIGKILL) };
            break child.wait()?;
        }
        thread::sleep(Duration::from_millis(2));
    };
    unsafe { libc::killpg(pgid, libc::SIGKILL) };
    let stdout = out.join().unwrap_or_default();
    let stderr = err.join().unwrap_or_default();
    let exit_code = status.code().unwrap_or_else(|| 128 + status.signal().unwrap_or(0));
    Ok(CommandResult { stdout, stderr, exit_code, duration_ms: start.elapsed().as_millis() as u64, timed_out })
}

/// One provisioned sandbox.
#[derive(Debug)]
pub struct SandboxHandle {
    pub bug_id: String,
    pub backend: IsolationBackend,
    pub adapter: ProjectAdapter,
    root: Option<TempDir>,
    worktree: PathBuf,
    bin: PathBuf,
    meta: PathBuf,
    snapshot: String,
    runtime: String,
    container: Option<String>,
    timeout: Duration,
    alive: bool,
    log: String,
    manifest: Option<ArtifactManifest>,
}

impl SandboxHandle {
    pub fn provision(
        repo: &Repo,
        spec: &BugSpec,
        adapter: &ProjectAdapter,
        opts: &SandboxOptions,
    ) -> Result<Self, SandboxError> {
        adapter.validate()?;
        let fail = |what: &str, e: &dyn std::fmt::Display| SandboxError::Provision(format!("{what}: {e}"));
        let snapshot = repo.rev_parse(&spec.snapshot_ref).map_err(|e| fail("snapshot does not resolve", &e))?;
        let root = TempDir::with_prefix("histrepair-")?;
        let worktree = root.path().join("work");
        let bin = root.path().join("bin");
        let meta = root.path().join("meta");
        fs::create_dir_all(&bin)?;
        fs::create_dir_all(&meta)?;
        fs::create_dir_all(root.path().join("home"))?;
        let source = repo.path().to_string_lossy().into_owned();
        let wt = worktree.to_string_lossy().into_owned();
        Repo::open(root.path())
            .run(&["clone", "--quiet", "--no-checkout", &source, &wt])
            .map_err(|e| fail("clone failed", &e))?;
        let clone = Repo::open(&worktree);
        clone
            .run(&["checkout", "--quiet", "--detach", &snapshot])
            .map_err(|e| fail("checkout failed", &e))?;
        let expected = repo.tree_of(&snapshot)?;
        let actual = tree_hash(&worktree)?;
        if expected != actual {
            return Err(SandboxError::Provision(format!(
                "worktree tree {actual} does not match snapshot tree {expected}"
            )));
        }
        install_wrappers(&bin, adapter)?;
        let container = match opts.backend {
            IsolationBackend::Local => None,
            IsolationBackend::Container => {
                let argv = container_run_argv(&opts.container_runtime, &adapter.image, &worktree, &bin, &meta);
                let out = Command::new(&argv[0])
                    .args(&argv[1..])
                    .output()
                    .map_err(|e| fail("container runtime unavailable", &e))?;
                if !out.status.success() {
                    return Err(SandboxError::Provision(format!(
                        "container start failed: {}",
                        String::from_utf8_lossy(&out.stderr).trim()
                    )));
                }
                Some(String::from_utf8_lossy(&out.stdout).trim().to_string())
            }
        };
        Ok(Self {
            bug_id: spec.bug_id.clone(),
            backend: opts.backend,
            adapter: adapter.clone(),
            root: Some(root),
            worktree,
            bin,
            meta,
            snapshot,
            runtime: opts.container_runtime.clone(),
            container,
            timeout: opts.per_command_timeout,
            alive: true,
            log: String::new(),
            manifest: None,
        })
    }

    pub fn worktree_path(&self) -> &Path {
        &self.worktree
    }

    pub fn snapshot(&self) -> &str {
        &self.snapshot
    }

    pub fn command_log(&self) -> &str {
        &self.log
    }

    fn env(&self) -> Vec<(String, String)> {
        let (worktree, bin, meta, home) = match self.backend {
            IsolationBackend::Local => (
                self.worktree.display().to_string(),
                self.bin.display().to_string(),
                self.meta.display().to_string(),
                self.worktree.with_file_name("home").display().to_string(),
            ),
            IsolationBackend::Container => {
                (CONTAINER_WORKTREE.into(), CONTAINER_BIN.into(), CONTAINER_META.into(), "/tmp".into())
            }
        };
        let values = [
            format!("{bin}:{SYSTEM_PATH}"),
            home,
            "C.UTF-8".into(),
            "C.UTF-8".into(),
            "UTC".into(),
            "dumb".into(),
            worktree,
            meta,
        ];
        ENV_ALLOWLIST.iter().map(|k| k.to_string()).zip(values).collect()
    }

    fn check_alive(&mut self) -> Result<(), SandboxError> {
        if self.alive && !self.worktree.is_dir() {
            self.alive = false;
        }
        if self.alive {
            Ok(())
        } else {
            Err(SandboxError::SandboxDead)
        }
    }

    fn clear_test_markers(&self) {
        for name in ["test.started", "test.out", "test.partial"] {
            let _ = fs::remove_file(self.meta.join(name));
        }
    }

    fn collect_test_verdict(&self) -> Option<TestVerdict> {
        if !self.meta.join("test.started").exists() {
            return None;
        }
        let verdict = match fs::read_to_string(self.meta.join("test.out")) {
            Ok(output) => match parse_test_output(&self.adapter.parser, &output) {
                Ok(outcome) => TestVerdict::Parsed(outcome),
                Err(reason) => TestVerdict::Unparseable { reason, raw_excerpt: excerpt(&output) },
            },
            Err(_) => TestVerdict::Unparseable {
                reason: "test run did not complete".into(),
                raw_excerpt: excerpt(&fs::read_to_string(self.meta.join("test.partial")).unwrap_or_default()),
            },
        };
        self.clear_test_markers();
        Some(verdict)
    }

    fn append_log(&mut self, step: u32, command: &str, r: &CommandResult) {
        let _ = writeln!(self.log, "=== step {step} ===\n$ {command}");
        let _ = writeln!(
            self.log,
            "[exit {}{}; {} ms]",
            r.exit_code,
            if r.timed_out { ", timed out" } else { "" },
            r.duration_ms
        );
        for (name, text) in [("stdout", &r.stdout), ("stderr", &r.stderr)] {
            if !text.is_empty() {
                let _ = writeln!(self.log, "--- {name} ---\n{}", text.trim_end_matches('\n'));
            }
        }
        self.log.push('\n');
    }

    /// Persist the patch and command log, then destroy the sandbox.
    /// Nothing is destroyed if persisting fails; repeated calls return the
    /// first manifest.
    pub fn teardown(&mut self, persist_dir: &Path) -> Result<ArtifactManifest, SandboxError> {
        if let Some(m) = &self.manifest {
            return Ok(m.clone());
        }
        let patch = match self.final_patch() {
            Ok(p) => p,
            Err(SandboxError::PatchUnavailable) => String::new(),
            Err(e) => return Err(e),
        };
        let manifest = ArtifactManifest {
            patch: persist_dir.join("patch.diff"),
            command_log: persist_dir.join("commands.log"),
        };
        let persist = |path: &Path, text: &str| {
            fs::create_dir_all(persist_dir)
                .and_then(|_| fs::write(path, text))
                .map_err(|source| SandboxError::Persist { path: path.to_path_buf(), source })
        };
        persist(&manifest.patch, &patch)?;
        persist(&manifest.command_log, &self.log)?;
        if let Some(id) = self.container.take() {
            let _ = Command::new(&self.runtime).args(["rm", "-f", &id]).output();
        }
        if let Some(root) = self.root.take() {
            let _ = root.close();
        }
        self.alive = false;
        self.manifest = Some(manifest.clone());
        Ok(manifest)
    }
}

impl Sandbox for SandboxHandle {
    fn exec(&mut self, step: u32, command: &str, timeout: Duration) -> Result<ExecOutput, SandboxError> {
        self.check_alive()?;
        self.clear_test_markers();
        let env = self.env();
        let cmd = match &self.container {
            None => {
                let mut cmd = Command::new("bash");
                cmd.args(["--noprofile", "--norc", "-c", command])
                    .current_dir(&self.worktree)
                    .env_clear()
                    .envs(env);
                cmd
            }
            Some(id) => {
                let argv = container_exec_argv(&self.runtime, id, &env, command);
                let mut cmd = Command::new(&argv[0]);
                cmd.args(&argv[1..]);
                cmd
            }
        };
        let result = run_captured(cmd, timeout)?;
        if result.timed_out {
            if let Some(id) = &self.container {
                let _ = Command::new(&self.runtime).args(["exec", id, "kill", "-9", "-1"]).output();
            }
        }
        self.append_log(step, command, &result);
        let test = self.collect_test_verdict();
        self.check_alive()?;
        Ok(ExecOutput { result, test })
    }

    fn run_test(&mut self, step: u32) -> Result<(CommandResult, TestVerdict), SandboxError> {
        let out = self.exec(step, TEST_WRAPPER, self.timeout)?;
        let verdict = out.test.unwrap_or_else(|| TestVerdict::Unparseable {
            reason: "test wrapper did not start".into(),
            raw_excerpt: excerpt(&out.result.stdout),
        });
        Ok((out.result, verdict))
    }

    /// Diff of the worktree (including untracked files) against the
    /// snapshot, ordered by path.
    fn final_patch(&self) -> Result<String, SandboxError> {
        if self.root.is_none() || !self.worktree.is_dir() {
            return Err(SandboxError::PatchUnavailable);
        }
        let scratch = TempDir::new()?;
        let index = scratch.path().join("index");
        let index = index.to_string_lossy();
        let env = [("GIT_INDEX_FILE", index.as_ref())];
        let repo = Repo::open(&self.worktree);
        repo.run_raw_env(&env, &["read-tree", &self.snapshot])?;
        repo.run_raw_env(&env, &["add", "-A", "--", "."])?;
        let out = repo.run_raw_env(
            &env,
            &["diff", "--cached", "--no-renames", "--no-color", "--no-ext-diff", &self.snapshot],
        )?;
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    }

    fn is_alive(&self) -> bool {
        self.alive && self.worktree.is_dir()
    }

    fn per_command_timeout(&self) -> Duration {
        self.timeout
    }
}

impl Drop for SandboxHandle {
    fn drop(&mut self) {
        if let Some(id) = self.container.take() {
            let _ = Command::new(&self.runtime).args(["rm", "-f", &id]).output();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn container_argv_shape() {
        let run = container_run_argv("docker", "img:1", Path::new("/w"), Path::new("/b"), Path::new("/m"));
        assert_eq!(
            run.join(" "),
            "docker run -d --network none -v /w:/workspace -v /b:/sandbox/bin:ro -v /m:/sandbox/meta -w /workspace img:1 sleep infinity"
        );
        let exec = container_exec_argv("podman", "abc", &[("LANG".into(), "C.UTF-8".into())], "echo hi && ls");
        assert_eq!(
            exec,
            vec!["podman", "exec", "-w", "/workspace", "-e", "LANG=C.UTF-8", "abc", "bash", "--noprofile", "--norc", "-c", "echo hi && ls"]
        );
    }

    #[test]
    fn captured_run_times_out_and_reports_signal() {
        let mut cmd = Command::new("bash");
        cmd.args(["-c", "echo start; sleep 30"]);
        let r = run_captured(cmd, Duration::from_millis(200)).unwrap();
        assert!(r.timed_out);
        assert_eq!(r.exit_code, 128 + 9);
        assert_eq!(r.stdout, "start\n");
    }

    #[test]
    fn background_jobs_do_not_hang_capture() {
        let mut cmd = Command::new("bash");
        cmd.args(["-c", "sleep 30 & echo done"]);
        let r = run_captured(cmd, Duration::from_secs(10)).unwrap();
        assert!(!r.timed_out);
        assert_eq!(r.stdout, "done\n");
        assert!(r.duration_ms < 5_000);
    }
}
