use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc};
use std::time::Duration;

use mlte::harness::{run_measured, RunOptions};
use mlte::store::server::BackgroundServer;
use mlte::{
    bind, evaluate_condition, project_stat, render_report, ArtifactKind, ArtifactStore, BindError,
    BindOptions, Binding, ModelContext, Payload, PropertyCatalog, RenderFormat, ReportStatus,
    Status, StoreError, StoreHandle, Value, ValueKind,
};

use crate::error::{exit, CliError};
use crate::inputs;

pub fn spec_new(ctx: &ModelContext, file: &Path, id: &str) -> Result<u8, CliError> {
    let spec = inputs::load_spec(file, &PropertyCatalog::builtin())?;
    let revision = StoreHandle::for_context(ctx).save_spec(ctx, id, &spec)?;
    println!("saved spec '{id}' revision {revision}");
    Ok(exit::OK)
}

pub fn spec_show(ctx: &ModelContext, id: &str, revision: Option<u64>) -> Result<u8, CliError> {
    let envelope = StoreHandle::for_context(ctx).load(ctx, ArtifactKind::Spec, id, revision)?;
    println!("{}", envelope.to_json());
    Ok(exit::OK)
}

pub fn ingest(
    ctx: &ModelContext,
    id: &str,
    kind: ValueKind,
    literal: &str,
) -> Result<u8, CliError> {
    if kind == ValueKind::ProcessStats {
        return Err(CliError::input(
            "process_stats values come from `mlte measure`, not ingest",
        ));
    }
    let payload = Payload::parse_literal(kind, literal)?;
    let value = Value::new(id, kind, payload, "ExternalMeasurement")?;
    let revision = StoreHandle::for_context(ctx).save_value(ctx, &value)?;
    println!("saved value '{id}' revision {revision}");
    Ok(exit::OK)
}

pub fn measure(
    ctx: &ModelContext,
    id: &str,
    interval_ms: u64,
    timeout_s: Option<f64>,
    command: &[String],
) -> Result<u8, CliError> {
    let mut options = RunOptions::default().with_interval_ms(interval_ms);
    if let Some(t) = timeout_s {
        let timeout = Duration::try_from_secs_f64(t)
            .ok()
            .filter(|d| !d.is_zero())
            .ok_or_else(|| CliError::input(format!("invalid timeout {t}")))?;
        options = options.with_timeout(timeout);
    }
    // The child runs in its own process group, so a terminal interrupt only
    // reaches us; the harness then kills the child's group.
    let cancel = Arc::new(AtomicBool::new(false));
    let flag = cancel.clone();
    if let Err(e) = ctrlc::set_handler(move || flag.store(true, Ordering::SeqCst)) {
        tracing::warn!("cannot install interrupt handler: {e}");
    }
    options = options.with_cancel(cancel);

    let value = run_measured(id, command, &options)?;
    let stats = value
        .process_stats()
        .expect("harness produces process stats");
    println!(
        "{id}: cpu avg {:.1}% (min {:.1}%, max {:.1}%), peak memory {} KiB, wall {:.2} s, {} samples, exit {}",
        stats.cpu_avg_percent,
        stats.cpu_min_percent,
        stats.cpu_max_percent,
        stats.peak_memory_kib,
        stats.wall_time_s,
        stats.sample_count,
        stats.exit_code
    );
    let revision = StoreHandle::for_context(ctx).save_value(ctx, &value)?;
    println!("saved value '{id}' revision {revision}");
    Ok(child_exit_status(stats.exit_code))
}

fn child_exit_status(code: i64) -> u8 {
    match u8::try_from(code) {
        Ok(c) => c,
        Err(_) => exit::FAILED,
    }
}

pub fn validate(
    ctx: &ModelContext,
    bindings_file: &Path,
    allow_incomplete: bool,
    spec_id: &str,
    report_id: &str,
) -> Result<u8, CliError> {
    let checks = inputs::load_bindings(bindings_file)?;
    let store = StoreHandle::for_context(ctx);
    let spec = store.load_spec(ctx, spec_id)?;

    let mut values: BTreeMap<String, Value> = BTreeMap::new();
    let mut binding = Binding::new();
    let mut results = Vec::new();
    for (property, property_checks) in &checks {
        for check in property_checks {
            if !values.contains_key(&check.value_id) {
                let value = store.load_value(ctx, &check.value_id)?;
                values.insert(check.value_id.clone(), value);
            }
            let value = &values[&check.value_id];
            let evaluated = match &check.stat_field {
                Some(field) => evaluate_condition(&project_stat(value, field)?, &check.condition)?,
                None => evaluate_condition(value, &check.condition)?,
            };
            binding.insert(property.clone(), check.evidence_id());
            results.push(evaluated);
        }
    }

    let report = match bind(&spec, binding, results, BindOptions { allow_incomplete }) {
        Ok(report) => report,
        Err(e @ BindError::CoverageError { .. }) => {
            return Err(CliError::input(format!(
                "{e}; pass --allow-incomplete to save a partial report"
            )))
        }
        Err(e) => return Err(e.into()),
    };
    for result in report.validation_results() {
        let tag = match result.status {
            Status::Success => "PASS",
            Status::Failure => "FAIL",
            Status::Info => "INFO",
        };
        println!("{tag} {}", result.message);
    }
    let revision = store.save_report(ctx, report_id, &report)?;
    let status = match report.status() {
        ReportStatus::Complete => "complete",
        ReportStatus::Incomplete => "incomplete",
    };
    println!(
        "saved report '{report_id}' revision {revision}: {status}, {} passed, {} failed, {} informational",
        report.count(Status::Success),
        report.count(Status::Failure),
        report.count(Status::Info)
    );
    let failed = report.count(Status::Failure) > 0;
    let acceptable = report.status() == ReportStatus::Complete || allow_incomplete;
    Ok(if !failed && acceptable {
        exit::OK
    } else {
        exit::FAILED
    })
}

pub fn report(
    ctx: &ModelContext,
    format: RenderFormat,
    out: Option<&Path>,
    id: &str,
    revision: Option<u64>,
) -> Result<u8, CliError> {
    let store = StoreHandle::for_context(ctx);
    let report = match revision {
        None => store.load_report(ctx, id)?,
        Some(r) => match store
            .load(ctx, ArtifactKind::Report, id, Some(r))?
            .into_body()
        {
            mlte::ArtifactBody::Report(report) => report,
            other => {
                return Err(StoreError::SchemaViolation(format!(
                    "expected report, found {}",
                    other.kind()
                ))
                .into())
            }
        },
    };
    let rendered = render_report(&report, format);
    match out {
        Some(path) => {
            std::fs::write(path, &rendered)
                .map_err(|e| CliError::infra(format!("cannot write {}: {e}", path.display())))?;
            println!("wrote {}", path.display());
        }
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(&rendered)
                .and_then(|_| stdout.write_all(b"\n"))
                .map_err(|e| CliError::infra(format!("cannot write report: {e}")))?;
        }
    }
    Ok(exit::OK)
}

pub fn list(ctx: &ModelContext, kind: Option<ArtifactKind>) -> Result<u8, CliError> {
    for entry in StoreHandle::for_context(ctx).list(ctx, kind)? {
        println!(
            "{}\t{}\t{}\t{}",
            entry.kind, entry.identifier, entry.latest_revision, entry.timestamp
        );
    }
    Ok(exit::OK)
}

pub fn catalog() -> Result<u8, CliError> {
    for property in PropertyCatalog::builtin().entries() {
        println!(
            "{} ({})\n    {}",
            property.name,
            property.category.as_str(),
            property.description
        );
    }
    Ok(exit::OK)
}

pub fn serve(root: &Path, host: &str, port: u16) -> Result<u8, CliError> {
    let address = if host.contains(':') {
        format!("[{host}]:{port}")
    } else {
        format!("{host}:{port}")
    };
    let server = BackgroundServer::start(root, &address).map_err(CliError::infra)?;
    let (tx, rx) = mpsc::channel();
    ctrlc::set_handler(move || {
        let _ = tx.send(());
    })
    .map_err(|e| CliError::infra(format!("cannot install signal handler: {e}")))?;
    println!("serving {} on {}", root.display(), server.uri());
    let _ = rx.recv();
    tracing::info!("shutting down");
    server.shutdown().map_err(CliError::infra)?;
    Ok(exit::OK)
}
