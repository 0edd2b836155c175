//! External generator process protocol.
//!
//! A command template is run through `sh -c` once per image with `{input}`,
//! `{output}` and `{stage}` substituted, or once per batch when it contains
//! `{input_list}`: a file with one `input<TAB>output` line per image. Images
//! are exchanged as 8-bit RGB PNG, exactly 256×256; exit status 0 means
//! success.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use super::{preprocess_input, GeneratorStage, NETWORK_SIZE};
use crate::error::{Error, Result};
use crate::raster::RasterImage;

fn shell_quote(path: &Path) -> String {
    format!("'{}'", path.to_string_lossy().replace('\'', r"'\''"))
}

/// Substitutes placeholders. Paths are single-quoted for the shell.
pub fn render_command(template: &str, input: Option<&Path>, output: Option<&Path>, list: Option<&Path>, stage: GeneratorStage) -> String {
    let mut cmd = template.replace("{stage}", stage.name());
    if let Some(p) = input {
        cmd = cmd.replace("{input}", &shell_quote(p));
    }
    if let Some(p) = output {
        cmd = cmd.replace("{output}", &shell_quote(p));
    }
    if let Some(p) = list {
        cmd = cmd.replace("{input_list}", &shell_quote(p));
    }
    cmd
}

fn run(cmd: &str) -> Result<String> {
    let output = Command::new("sh").arg("-c").arg(cmd).output()?;
    let mut transcript = format!("$ {cmd}\nexit: {}\n", output.status);
    let stdout = String::from_utf8_lossy(&output.stdout);
    let stderr = String::from_utf8_lossy(&output.stderr);
    if !stdout.trim().is_empty() {
        let _ = writeln!(transcript, "stdout:\n{}", stdout.trim_end());
    }
    if !stderr.trim().is_empty() {
        let _ = writeln!(transcript, "stderr:\n{}", stderr.trim_end());
    }
    if !output.status.success() {
        return Err(Error::ExternalGenerator { message: "command exited unsuccessfully".into(), transcript });
    }
    Ok(transcript)
}

/// Runs the external generator over `inputs` and reads back its outputs.
/// Inputs that are not already 256×256 are resized into a scratch
/// directory first.
pub fn external_generate(template: &str, inputs: &[impl AsRef<Path>], stage: GeneratorStage) -> Result<Vec<RasterImage>> {
    let scratch = tempfile::tempdir()?;
    let mut jobs: Vec<(PathBuf, PathBuf)> = Vec::with_capacity(inputs.len());
    for (k, input) in inputs.iter().enumerate() {
        let input = input.as_ref();
        if !input.is_file() {
            return Err(Error::Input(format!("generator input {} does not exist", input.display())));
        }
        let img = RasterImage::load(input)?;
        let path = if img.dims() == (NETWORK_SIZE, NETWORK_SIZE) {
            input.to_path_buf()
        } else {
            let p = scratch.path().join(format!("input_{k:04}.png"));
            preprocess_input(&img, stage).save(&p)?;
            p
        };
        jobs.push((path, scratch.path().join(format!("output_{k:04}.png"))));
    }

    let mut transcripts = Vec::new();
    if template.contains("{input_list}") {
        let list = scratch.path().join("inputs.tsv");
        let body: String = jobs.iter().map(|(i, o)| format!("{}\t{}\n", i.display(), o.display())).collect();
        fs::write(&list, body)?;
        transcripts.push(run(&render_command(template, None, None, Some(&list), stage))?);
    } else {
        for (input, output) in &jobs {
            transcripts.push(run(&render_command(template, Some(input), Some(output), None, stage))?);
        }
    }

    jobs.iter()
        .enumerate()
        .map(|(k, (_, output))| {
            let transcript = transcripts.get(k).or(transcripts.last()).cloned().unwrap_or_default();
            if !output.is_file() {
                return Err(Error::ExternalGenerator {
                    message: format!("no output written to {}", output.display()),
                    transcript,
                });
            }
            let img = RasterImage::load(output)?;
            if img.dims() != (NETWORK_SIZE, NETWORK_SIZE) {
                return Err(Error::ExternalGenerator {
                    message: format!("output is {}x{}, expected {NETWORK_SIZE}x{NETWORK_SIZE}", img.width(), img.height()),
                    transcript,
                });
            }
            Ok(img)
        })
        .collect()
}
