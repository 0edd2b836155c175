use std::fs;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use outpano_core::PipelineConfig;
use serde_json::{json, Value};

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Method {
    Overlay,
    Poisson,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Overlay => "overlay",
            Method::Poisson => "poisson",
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Precond {
    None,
    Jacobi,
    Mic,
}

/// Pipeline configuration: an optional JSON file, then flag overrides.
#[derive(Args, Debug, Default)]
pub struct ConfigArgs {
    /// JSON file mirroring the pipeline configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// `resize_baseline`, `mirror_pad`, `patch_extrapolate`,
    /// `external:<command>` or a JSON object.
    #[arg(long, value_name = "SPEC")]
    pub near_generator: Option<String>,
    #[arg(long, value_name = "SPEC")]
    pub mid_generator: Option<String>,

    #[arg(long, value_enum)]
    pub fusion_method: Option<Method>,
    #[arg(long)]
    pub cg_tolerance: Option<f64>,
    #[arg(long)]
    pub cg_max_iters: Option<usize>,
    #[arg(long, value_enum)]
    pub preconditioner: Option<Precond>,

    #[arg(long)]
    pub center_fov: Option<f64>,
    #[arg(long)]
    pub near_fov: Option<f64>,
    #[arg(long)]
    pub mid_fov: Option<f64>,

    #[arg(long)]
    pub output_height: Option<usize>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub extend_to_360: Option<bool>,
    #[arg(long)]
    pub mid_downscale: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,

    /// Sets any field by dotted path, e.g.
    /// `near_generator.patch_size=9` or `fusion.cg_max_iters=null`.
    #[arg(long = "set", value_name = "PATH=JSON")]
    pub sets: Vec<String>,
}

pub fn generator_value(spec: &str) -> Result<Value, String> {
    let spec = spec.trim();
    if spec.starts_with('{') {
        return serde_json::from_str(spec).map_err(|e| format!("generator JSON: {e}"));
    }
    if let Some(command) = spec.strip_prefix("external:") {
        return Ok(json!({ "kind": "external", "command": command }));
    }
    match spec {
        "resize_baseline" | "mirror_pad" | "patch_extrapolate" => Ok(json!({ "kind": spec })),
        other => Err(format!("unknown generator `{other}`")),
    }
}

fn set_path(root: &mut Value, path: &str, value: Value) -> Result<(), String> {
    let mut node = root;
    let mut parts = path.split('.').peekable();
    while let Some(key) = parts.next() {
        let obj = node.as_object_mut().ok_or_else(|| format!("`{path}`: `{key}` is not inside an object"))?;
        if parts.peek().is_none() {
            obj.insert(key.to_string(), value);
            return Ok(());
        }
        node = obj.entry(key.to_string()).or_insert_with(|| json!({}));
    }
    Err(format!("empty path in `{path}`"))
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<PipelineConfig, String> {
        let base: PipelineConfig = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
                serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?
            }
            None => PipelineConfig::default(),
        };
        let mut v = serde_json::to_value(&base).map_err(|e| e.to_string())?;

        let mut edits: Vec<(&str, Value)> = Vec::new();
        if let Some(s) = &self.near_generator {
            edits.push(("near_generator", generator_value(s)?));
        }
        if let Some(s) = &self.mid_generator {
            edits.push(("mid_generator", generator_value(s)?));
        }
        if let Some(m) = self.fusion_method {
            edits.push(("fusion.method", json!(m.name())));
        }
        if let Some(t) = self.cg_tolerance {
            edits.push(("fusion.cg_tolerance", json!(t)));
        }
        if let Some(n) = self.cg_max_iters {
            edits.push(("fusion.cg_max_iters", json!(n)));
        }
        if let Some(p) = self.preconditioner {
            let name = match p {
                Precond::None => "none",
                Precond::Jacobi => "jacobi",
                Precond::Mic => "mic",
            };
            edits.push(("fusion.preconditioner", json!(name)));
        }
        for (key, val) in [("layout.center_fov", self.center_fov), ("layout.near_fov", self.near_fov), ("layout.mid_fov", self.mid_fov)] {
            if let Some(x) = val {
                edits.push((key, json!(x)));
            }
        }
        if let Some(h) = self.output_height {
            edits.push(("output_height", json!(h)));
        }
        if let Some(b) = self.extend_to_360 {
            edits.push(("extend_to_360", json!(b)));
        }
        if let Some(d) = self.mid_downscale {
            edits.push(("mid_downscale", json!(d)));
        }
        if let Some(s) = self.seed {
            edits.push(("seed", json!(s)));
        }
        for (path, value) in edits {
            set_path(&mut v, path, value)?;
        }
        for raw in &self.sets {
            let (path, text) = raw.split_once('=').ok_or_else(|| format!("--set expects PATH=JSON, got `{raw}`"))?;
            // Bare words are taken as strings.
            let value = serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.to_string()));
            set_path(&mut v, path.trim(), value)?;
        }

        let config: PipelineConfig = serde_json::from_value(v).map_err(|e| format!("configuration: {e}"))?;
        config.validate().map_err(|e| e.to_string())?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use outpano_core::{FusionMethod, GeneratorSpec};

    #[test]
    fn flags_override_defaults() {
        let args = ConfigArgs {
            near_generator: Some("mirror_pad".into()),
            mid_generator: Some("external:cp {input} {output}".into()),
            fusion_method: Some(Method::Overlay),
            output_height: Some(128),
            extend_to_360: Some(true),
            seed: Some(9),
            center_fov: Some(40.0),
            sets: vec!["fusion.cg_max_iters=77".into()],
            ..Default::default()
        };
        let c = args.resolve().unwrap();
        assert_eq!(c.near_generator, GeneratorSpec::MirrorPad);
        assert_eq!(c.mid_generator, GeneratorSpec::External { command: "cp {input} {output}".into() });
        assert_eq!(c.fusion.method, FusionMethod::Overlay);
        assert_eq!(c.fusion.cg_max_iters, Some(77));
        assert_eq!((c.output_height, c.extend_to_360, c.seed), (128, true, 9));
        assert_eq!(c.layout.center_fov, 40.0);
        assert_eq!(c.layout.near_fov, 90.0);
    }

    #[test]
    fn set_reaches_nested_generator_params() {
        let args = ConfigArgs { sets: vec!["near_generator.patch_size=9".into()], ..Default::default() };
        match args.resolve().unwrap().near_generator {
            GeneratorSpec::PatchExtrapolate(p) => assert_eq!(p.patch_size, 9),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_values_are_rejected() {
        let bad = [
            ConfigArgs { mid_downscale: Some(3), ..Default::default() },
            ConfigArgs { near_generator: Some("gan".into()), ..Default::default() },
            ConfigArgs { sets: vec!["seed".into()], ..Default::default() },
            ConfigArgs { sets: vec!["near_generator.patch_size=4".into()], ..Default::default() },
        ];
        for args in bad {
            assert!(args.resolve().is_err(), "{args:?}");
        }
    }
}
