//! Command-line front end: configuration and subcommands.

pub mod commands;
pub mod config;

/// Parallelism budget: explicit value, else RC_DENSITY_THREADS, else none.
pub fn thread_budget(
    explicit: Option<usize>,
    env: Option<&str>,
) -> Result<Option<usize>, config::ConfigError> {
    if explicit.is_some() {
        return Ok(explicit);
    }
    match env {
        None => Ok(None),
        Some(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(config::ConfigError {
                origin: config::Origin::Flag("threads".into()),
                message: format!("RC_DENSITY_THREADS = `{v}` must be a positive integer"),
            }),
        },
    }
}
