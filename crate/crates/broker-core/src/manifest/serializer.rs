//! Canonical text form for manifests.

use std::fmt::Write;

use super::{ComponentBinding, DeploymentManifest, DeploymentOption};

/// Renders a valid manifest as DSL source text.
///
/// Binding order is preserved; consecutive bindings of the same kind share
/// a kind block. Re-parsing the output yields a manifest structurally equal
/// to the input (source lines aside).
pub fn serialize_manifest(manifest: &DeploymentManifest) -> String {
    let mut out = String::new();
    out.push_str("broker {\n");
    let _ = writeln!(out, "  governance.lifecycle = {}", manifest.lifecycle.keyword());

    let mut bindings = manifest.bindings.iter().peekable();
    while let Some(binding) = bindings.next() {
        let kind = binding.selector.kind;
        let _ = writeln!(out, "  {} {{", kind.keyword());
        write_binding(&mut out, binding);
        while let Some(next) = bindings.peek() {
            if next.selector.kind != kind {
                break;
            }
            let next = bindings.next().expect("peeked");
            write_binding(&mut out, next);
        }
        out.push_str("  }\n");
    }
    out.push_str("}\n");
    out
}

fn write_binding(out: &mut String, binding: &ComponentBinding) {
    out.push_str("    ");
    let sel = &binding.selector;
    match (&sel.environment, sel.names.is_empty()) {
        (Some(env), _) => {
            let _ = write!(out, "environments[\"{env}\"].{}", sel.names[0]);
        }
        (None, true) => out.push_str("all"),
        (None, false) => {
            out.push('[');
            for (i, name) in sel.names.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                let _ = write!(out, "\"{name}\"");
            }
            out.push(']');
        }
    }
    out.push(' ');
    match &binding.option {
        DeploymentOption::Economy => out.push_str("economy"),
        DeploymentOption::BestEffort => out.push_str("bestEffort"),
        DeploymentOption::PrivateCloud { endpoint, cloud_type, provider_id } => {
            let _ = write!(out, "privateCloud(\"{endpoint}\", {}, \"{provider_id}\")", cloud_type.keyword());
        }
    }
    out.push('\n');
}
