use std::collections::BTreeMap;
use std::path::PathBuf;

use iotforge_core::codegen::descriptor::{DriverDescriptor, ServiceDescriptor, SinkDescriptor};
use iotforge_core::codegen::{
    paths_are_clean, CodegenError, Plugin, PluginRegistry, Stage, TargetKind, NEUTRAL_SCAFFOLD, SIM_DESCRIPTOR,
};
use iotforge_core::layout::ProjectLayout;
use iotforge_core::validate::Project;

fn load(name: &str) -> Project {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus").join(name);
    ProjectLayout::new(root).load().unwrap().project.unwrap()
}

fn artifact<'a>(g: &'a iotforge_core::codegen::Generated, path: &str) -> &'a str {
    &g.artifacts.iter().find(|a| a.path == path).unwrap_or_else(|| panic!("no {path}")).content
}

#[test]
fn shipped_plugins() {
    let mut reg = PluginRegistry::new();
    assert_eq!(reg.list_plugins(), [NEUTRAL_SCAFFOLD, SIM_DESCRIPTOR]);
    let custom = Plugin::scaffold("terse", [("driver", "{name}\n"), ("service", "{name}\n"), ("sink", "{name}\n")]);
    reg.register(custom.clone()).unwrap();
    assert_eq!(reg.list_plugins().len(), 3);
    assert_eq!(reg.register(custom), Err(CodegenError::DuplicatePlugin("terse".into())));
}

#[test]
fn registration_checks_placeholders() {
    let mut reg = PluginRegistry::new();
    let bad = Plugin::scaffold("bad", [("driver", "{colour}"), ("service", ""), ("sink", "")]);
    assert!(matches!(reg.register(bad), Err(CodegenError::UnknownPlaceholder { name, .. }) if name == "colour"));
    let missing = Plugin {
        id: "half".into(),
        target: TargetKind::NeutralScaffold,
        templates: BTreeMap::from([("driver".to_string(), String::new())]),
    };
    assert!(matches!(reg.register(missing), Err(CodegenError::MissingTemplate { .. })));
}

#[test]
fn unknown_plugin() {
    let reg = PluginRegistry::new();
    let p = load("fire");
    assert_eq!(
        reg.generate_domain_framework(&p.domain, "android").unwrap_err(),
        CodegenError::UnknownPlugin("android".into())
    );
}

#[test]
fn periodic_sensor_descriptor() {
    let reg = PluginRegistry::new();
    let g = reg.generate_domain_framework(&load("fire").domain, SIM_DESCRIPTOR).unwrap();
    let text = artifact(&g, "drivers/TemperatureSensor.json");
    let v: serde_json::Value = serde_json::from_str(text).unwrap();
    assert_eq!(v["kind"], "periodic");
    assert_eq!(v["d"], 1);
    assert_eq!(v["k"], 360);
    let d: DriverDescriptor = serde_json::from_str(text).unwrap();
    assert_eq!(d.sample_period_ms(), Some(1000));
    assert_eq!(d.duration_ms(), Some(360_000));
}

#[test]
fn descriptor_json_is_canonical() {
    let reg = PluginRegistry::new();
    let g = reg.generate_domain_framework(&load("hvac").domain, SIM_DESCRIPTOR).unwrap();
    let expected = r#"{
  "actions": [
    {
      "name": "SetTemp",
      "params": [
        {
          "name": "setTemp",
          "type": "double"
        }
      ]
    },
    {
      "name": "Off",
      "params": []
    }
  ],
  "kind": "actuator",
  "name": "Heater"
}
"#;
    assert_eq!(artifact(&g, "drivers/Heater.json"), expected);
}

#[test]
fn heater_scaffold_lists_actions() {
    let reg = PluginRegistry::new();
    let g = reg.generate_domain_framework(&load("hvac").domain, NEUTRAL_SCAFFOLD).unwrap();
    let text = artifact(&g, "domain/Heater.driver.txt");
    assert!(text.contains("action SetTemp(setTemp: double)\n"), "{text}");
    assert!(text.contains("action Off()\n"), "{text}");
}

#[test]
fn empty_domain_generates_nothing() {
    let reg = PluginRegistry::new();
    for plugin in [NEUTRAL_SCAFFOLD, SIM_DESCRIPTOR] {
        assert!(reg.generate_domain_framework(&Default::default(), plugin).unwrap().artifacts.is_empty());
    }
}

#[test]
fn proximity_handlers() {
    let reg = PluginRegistry::new();
    let p = load("hvac");
    let g = reg.generate_architecture_framework(&p.arch, &p.domain, NEUTRAL_SCAFFOLD).unwrap();
    let text = artifact(&g, "architecture/Proximity.service.txt");
    for h in ["onNewbadgeDetected(", "onNewbadgeDisappeared(", "onNewprofileReceived("] {
        assert!(text.contains(h), "{h} missing in\n{text}");
    }
    assert!(g.warnings.is_empty());
}

#[test]
fn common_service_compute_spec() {
    let reg = PluginRegistry::new();
    let p = load("fire");
    let g = reg.generate_architecture_framework(&p.arch, &p.domain, SIM_DESCRIPTOR).unwrap();
    let v: serde_json::Value = serde_json::from_str(artifact(&g, "services/RoomAvgTemp.json")).unwrap();
    assert_eq!(
        v["computeSpec"],
        serde_json::json!({"operator": "AVG_BY_SAMPLE", "n": 5, "field": "tempValue"})
    );
}

#[test]
fn service_without_consumes_warns() {
    let reg = PluginRegistry::new();
    let mut p = load("fire");
    p.arch.services[3].consumes.clear();
    let g = reg.generate_architecture_framework(&p.arch, &p.domain, NEUTRAL_SCAFFOLD).unwrap();
    assert_eq!(g.warnings.len(), 1);
    let text = artifact(&g, "architecture/FireLogger.service.txt");
    assert!(!text.contains("abstract void"));
}

#[test]
fn sinks() {
    let reg = PluginRegistry::new();
    let fire = load("fire");
    let g = reg.generate_ui_framework(fire.ui.as_ref(), SIM_DESCRIPTOR).unwrap();
    let sink: SinkDescriptor = serde_json::from_str(artifact(&g, "sinks/EndUserApp.json")).unwrap();
    assert_eq!(sink.event, "fireNotify");
    let home = load("smarthome");
    let g = reg.generate_ui_framework(home.ui.as_ref(), SIM_DESCRIPTOR).unwrap();
    let sink: SinkDescriptor = serde_json::from_str(artifact(&g, "sinks/Dashboard.json")).unwrap();
    assert_eq!(sink.event, "sensorMeasurement");
    assert!(reg.generate_ui_framework(None, SIM_DESCRIPTOR).unwrap().artifacts.is_empty());
}

#[test]
fn descriptors_rebuild_service_declarations() {
    let reg = PluginRegistry::new();
    for name in ["hvac", "fire", "smarthome"] {
        let p = load(name);
        let g = reg.generate_project(&p, SIM_DESCRIPTOR).unwrap();
        for s in &p.arch.services {
            let d: ServiceDescriptor = serde_json::from_str(artifact(&g, &format!("services/{}.json", s.name))).unwrap();
            assert_eq!(&d.to_service_decl().unwrap(), s);
        }
    }
}

#[test]
fn generation_is_deterministic_with_clean_paths() {
    let reg = PluginRegistry::new();
    for name in ["hvac", "fire", "smarthome"] {
        let p = load(name);
        for plugin in [NEUTRAL_SCAFFOLD, SIM_DESCRIPTOR] {
            let a = reg.generate_project(&p, plugin).unwrap();
            let b = reg.generate_project(&p, plugin).unwrap();
            assert_eq!(a, b);
            assert!(paths_are_clean(&a.artifacts));
        }
    }
}

#[test]
fn fire_build_counts() {
    let reg = PluginRegistry::new();
    let g = reg.generate_project(&load("fire"), SIM_DESCRIPTOR).unwrap();
    let count = |s: Stage| g.artifacts.iter().filter(|a| a.stage == s).count();
    assert_eq!(count(Stage::DomainFramework), 3);
    assert_eq!(count(Stage::ArchitectureFramework), 4);
    assert_eq!(count(Stage::UiFramework), 1);
}
