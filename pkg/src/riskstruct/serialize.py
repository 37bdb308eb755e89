"""JSON persistence for catalogs and models, plus deterministic DOT export.

All output is byte-stable for a given input: collections are emitted in
canonical (label) order and probabilities are written with at most six
significant digits.
"""

from __future__ import annotations

import json
from typing import Any, Mapping, Optional

from .core import (
    Action,
    ActionClass,
    HazardId,
    HazardPhaseModel,
    ModelOptions,
    OperationalSituation,
    Phase,
    RiskModelError,
    RiskState,
    RiskStructure,
    Severity,
    Transition,
    parse_state,
)
from .analysis import Region, RegionAssignment, assign_regions
from .construct import (
    Catalog,
    CatalogInvalid,
    ConstructionLog,
    EndangermentRule,
    MishapRule,
    MitigationRule,
    PhaseGuard,
    SweepRecord,
)
from .order import (
    FeatureBaseline,
    FeatureEffect,
    FeatureModel,
    FeatureStatus,
    FeatureVariant,
)
from .reduce import DropRule


def fmt_prob(p: float) -> float:
    """Clamp a probability to six significant digits for serialization."""
    return float(f"{p:.6g}")


def _phase(text: Any, anchor: str, errors: list[str]) -> Optional[Phase]:
    try:
        return Phase.parse(str(text))
    except RiskModelError as exc:
        errors.append(f"{anchor}: {exc}")
        return None


def _guard(raw: Any, anchor: str, errors: list[str]) -> PhaseGuard:
    if raw is None:
        return PhaseGuard()
    if not isinstance(raw, dict):
        errors.append(f"{anchor}: guard must be an object")
        return PhaseGuard()
    constraints = {}
    for hid, phases in raw.items():
        parsed = [_phase(p, f"{anchor}.{hid}", errors) for p in phases]
        constraints[hid] = tuple(p for p in parsed if p is not None)
    return PhaseGuard.of(constraints)


def catalog_from_dict(data: Mapping[str, Any]) -> Catalog:
    """Build and validate a catalog; raises CatalogInvalid with anchored
    messages on any defect."""
    errors: list[str] = []
    hazards = []
    for i, h in enumerate(data.get("hazards", ())):
        try:
            hazards.append(
                HazardPhaseModel(
                    HazardId(str(h["id"]), str(h.get("description", ""))),
                    int(h["n_mitigations"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            errors.append(f"hazards[{i}]: {exc}")
    features = _features_from_dict(data.get("features"), errors)

    endangerments = []
    for i, r in enumerate(data.get("endangerments", ())):
        anchor = f"endangerments[{i}]"
        try:
            from_raw = r.get("from_phases", ["0"])
            from_phases = tuple(
                p
                for p in (_phase(t, f"{anchor}.from_phases", errors) for t in from_raw)
                if p is not None
            )
            endangerments.append(
                EndangermentRule(
                    name=str(r["name"]),
                    activates=tuple(str(x) for x in r["activates"]),
                    pr=float(r["pr"]),
                    guard=_guard(r.get("guard"), anchor, errors),
                    from_phases=from_phases,
                    domains=tuple(r.get("domains", ())),
                    description=str(r.get("description", "")),
                    enabled=bool(r.get("enabled", True)),
                    absorbed=bool(r.get("absorbed", False)),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            errors.append(f"{anchor}: {exc}")
    mishaps = []
    for i, r in enumerate(data.get("mishaps", ())):
        anchor = f"mishaps[{i}]"
        try:
            mishaps.append(
                MishapRule(
                    name=str(r["name"]),
                    requires=tuple(str(x) for x in r["requires"]),
                    sets=tuple(str(x) for x in r["sets"]),
                    pr=float(r["pr"]),
                    sv=Severity(str(r["sv"])),
                    guard=_guard(r.get("guard"), anchor, errors),
                    domains=tuple(r.get("domains", ())),
                    description=str(r.get("description", "")),
                    enabled=bool(r.get("enabled", True)),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            errors.append(f"{anchor}: {exc}")
    mitigations = []
    for i, r in enumerate(data.get("mitigations", ())):
        anchor = f"mitigations[{i}]"
        try:
            mitigates = []
            for hid, target in dict(r["mitigates"]).items():
                parsed = _phase(target, f"{anchor}.mitigates.{hid}", errors)
                if parsed is not None:
                    mitigates.append((str(hid), parsed))
            mitigations.append(
                MitigationRule(
                    name=str(r["name"]),
                    mitigates=tuple(sorted(mitigates)),
                    pr=float(r["pr"]),
                    cs=int(r["cs"]),
                    guard=_guard(r.get("guard"), anchor, errors),
                    domains=tuple(r.get("domains", ())),
                    description=str(r.get("description", "")),
                    enabled=bool(r.get("enabled", True)),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            errors.append(f"{anchor}: {exc}")

    situation = _situation_from_dict(data.get("situation"), errors)
    options = _options_from_dict(data.get("options"), errors)
    if errors:
        raise CatalogInvalid(errors)
    catalog = Catalog(
        hazards=tuple(hazards),
        endangerments=tuple(endangerments),
        mishaps=tuple(mishaps),
        mitigations=tuple(mitigations),
        features=features,
        situation=situation,
        options=options,
    )
    catalog.validate()
    return catalog


def _features_from_dict(raw: Any, errors: list[str]) -> Optional[FeatureModel]:
    if raw is None:
        return None
    try:
        universe = tuple(
            FeatureBaseline(
                name=str(f["name"]),
                variant=FeatureVariant(str(f.get("variant", "primary"))),
                status=FeatureStatus(str(f.get("status", "in_loop_operational"))),
                fallback=bool(f.get("fallback", False)),
            )
            for f in raw.get("universe", ())
        )
        effects = []
        for i, e in enumerate(raw.get("effects", ())):
            phase = _phase(e["phase"], f"features.effects[{i}]", errors)
            if phase is None:
                continue
            effects.append(
                (
                    str(e["hazard"]),
                    phase,
                    FeatureEffect(
                        str(e["feature"]),
                        FeatureVariant(str(e["variant"])),
                        FeatureStatus(str(e["status"])),
                    ),
                )
            )
        return FeatureModel(
            universe=universe,
            effects=tuple(effects),
            priority=tuple(str(h) for h in raw.get("priority", ())),
        )
    except (KeyError, TypeError, ValueError, RiskModelError) as exc:
        errors.append(f"features: {exc}")
        return None


def _situation_from_dict(raw: Any, errors: list[str]) -> OperationalSituation:
    if raw is None:
        return OperationalSituation()
    try:
        initial = raw.get("initial")
        return OperationalSituation(
            name=str(raw.get("name", "")),
            initial=tuple(str(s) for s in initial) if initial else None,
            invariant_predicates=tuple(
                str(p) for p in raw.get("invariant_predicates", ())
            ),
            notes=str(raw.get("notes", "")),
        )
    except (TypeError, ValueError) as exc:
        errors.append(f"situation: {exc}")
        return OperationalSituation()


def _options_from_dict(raw: Any, errors: list[str]) -> ModelOptions:
    if raw is None:
        return ModelOptions()
    try:
        bands = raw.get("bands", {})
        return ModelOptions(
            max_subset_size=int(raw.get("max_subset_size", 2)),
            band_l_below=float(bands.get("l_below", 0.01)),
            band_h_at_least=float(bands.get("h_at_least", 0.1)),
            region_policy=str(raw.get("region_policy", "no_active")),
        )
    except (TypeError, ValueError) as exc:
        errors.append(f"options: {exc}")
        return ModelOptions()


def load_catalog(path: str) -> Catalog:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CatalogInvalid(
            [f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}"]
        ) from None
    if not isinstance(data, dict):
        raise CatalogInvalid([f"{path}: catalog must be a JSON object"])
    return catalog_from_dict(data)


def _features_to_dict(features: FeatureModel) -> dict:
    return {
        "universe": [
            {
                "name": f.name,
                "variant": f.variant.value,
                "status": f.status.value,
                "fallback": f.fallback,
            }
            for f in features.universe
        ],
        "effects": [
            {
                "hazard": hid,
                "phase": phase.render(),
                "feature": eff.feature,
                "variant": eff.variant.value,
                "status": eff.status.value,
            }
            for hid, phase, eff in features.effects
        ],
        "priority": list(features.priority),
    }


def model_to_dict(
    model: RiskStructure, log: ConstructionLog = ConstructionLog()
) -> dict:
    label = model.label
    d: dict[str, Any] = {
        "hazards": [
            {
                "id": h.id,
                "description": h.hazard.description,
                "n_mitigations": h.n_mitigations,
            }
            for h in model.hazards
        ],
        "states": [
            {"name": s.name, "label": label(s)} for s in model.sorted_states()
        ],
        "initial": sorted(label(s) for s in model.initial),
        "actions": [
            {
                "name": a.name,
                "class": a.kind.value,
                "domains": list(a.domains),
                "effect": {h: p.render() for h, p in a.effect},
            }
            for a in model.actions
        ],
        "transitions": [
            {
                "source": label(t.source),
                "action": t.action.name,
                "target": label(t.target),
                "pr": fmt_prob(t.pr) if t.pr is not None else None,
                "cs": t.cs,
            }
            for t in sorted(
                model.transitions,
                key=lambda t: (label(t.source), t.action.name, label(t.target)),
            )
        ],
        "sv": {
            label(s): v.value
            for s, v in sorted(model.sv.items(), key=lambda kv: label(kv[0]))
        },
        "log": [
            {
                "increment": r.increment,
                "sweep": r.sweep,
                "states_added": r.states_added,
                "transitions_added": r.transitions_added,
                "states_total": r.states_total,
                "non_mishap_total": r.non_mishap_total,
                "transitions_total": r.transitions_total,
            }
            for r in log.records
        ],
        "options": {
            "max_subset_size": model.options.max_subset_size,
            "bands": {
                "l_below": model.options.band_l_below,
                "h_at_least": model.options.band_h_at_least,
            },
            "region_policy": model.options.region_policy,
        },
    }
    if model.situation is not None:
        d["situation"] = {
            "name": model.situation.name,
            "initial": list(model.situation.initial)
            if model.situation.initial
            else None,
            "invariant_predicates": list(model.situation.invariant_predicates),
            "notes": model.situation.notes,
        }
    if model.features is not None:
        d["features"] = _features_to_dict(model.features)
    return d


def model_to_json(model: RiskStructure, log: ConstructionLog = ConstructionLog()) -> str:
    return json.dumps(model_to_dict(model, log), indent=2, ensure_ascii=False) + "\n"


def model_from_dict(data: Mapping[str, Any]) -> tuple[RiskStructure, ConstructionLog]:
    errors: list[str] = []
    hazards = tuple(
        HazardPhaseModel(
            HazardId(str(h["id"]), str(h.get("description", ""))),
            int(h["n_mitigations"]),
        )
        for h in data["hazards"]
    )
    features = _features_from_dict(data.get("features"), errors)
    situation = _situation_from_dict(data.get("situation"), errors)
    options = _options_from_dict(data.get("options"), errors)
    if errors:
        raise RiskModelError("; ".join(errors))

    by_label: dict[str, RiskState] = {}
    labels: dict[RiskState, str] = {}
    states = set()
    for entry in data["states"]:
        state = parse_state(str(entry["name"]), hazards)
        label = str(entry.get("label", state.name))
        states.add(state)
        by_label[label] = state
        by_label.setdefault(state.name, state)
        if label != state.name:
            labels[state] = label

    actions: dict[str, Action] = {}
    for a in data.get("actions", ()):
        effect = tuple(
            (str(h), Phase.parse(str(p))) for h, p in dict(a.get("effect", {})).items()
        )
        actions[str(a["name"])] = Action(
            name=str(a["name"]),
            kind=ActionClass(str(a["class"])),
            effect=effect,
            domains=tuple(a.get("domains", ())),
        )

    transitions = []
    for t in data.get("transitions", ()):
        source, target = by_label[str(t["source"])], by_label[str(t["target"])]
        transitions.append(
            # reduced models carry class-level edges, so phase-legality is
            # not re-imposed on load
            Transition(
                source=source,
                action=actions[str(t["action"])],
                target=target,
                pr=float(t["pr"]) if t.get("pr") is not None else None,
                cs=int(t["cs"]) if t.get("cs") is not None else None,
                checked=False,
            )
        )

    sv = {by_label[str(k)]: Severity(str(v)) for k, v in data.get("sv", {}).items()}
    log = ConstructionLog(
        tuple(
            SweepRecord(
                increment=int(r["increment"]),
                sweep=str(r["sweep"]),
                states_added=int(r["states_added"]),
                transitions_added=int(r["transitions_added"]),
                states_total=int(r["states_total"]),
                non_mishap_total=int(r["non_mishap_total"]),
                transitions_total=int(r["transitions_total"]),
            )
            for r in data.get("log", ())
        )
    )
    model = RiskStructure(
        hazards=hazards,
        states=frozenset(states),
        actions=tuple(sorted(actions.values(), key=lambda a: a.name)),
        transitions=tuple(sorted(transitions, key=lambda t: t.key())),
        initial=frozenset(by_label[str(n)] for n in data["initial"]),
        sv=sv,
        situation=situation,
        features=features,
        options=options,
        labels=labels,
    )
    return model, log


def load_model(path: str) -> tuple[RiskStructure, ConstructionLog]:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return model_from_dict(data)


def save_model(
    path: str, model: RiskStructure, log: ConstructionLog = ConstructionLog()
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(model_to_json(model, log))


def load_drop_rules(path: str) -> tuple[DropRule, ...]:
    """Read a drop-rule file: {"drop": [{"action", "source_region"?, "self_loop"?}]}."""
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    rules = []
    for i, r in enumerate(data.get("drop", ())):
        try:
            rules.append(
                DropRule(
                    action=str(r["action"]),
                    source_region=Region(r["source_region"])
                    if r.get("source_region") is not None
                    else None,
                    self_loop=bool(r["self_loop"])
                    if r.get("self_loop") is not None
                    else None,
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise RiskModelError(f"drop[{i}]: {exc}") from None
    return tuple(rules)


_REGION_STYLE = {
    Region.SAFE: "solid",
    Region.HAZARDOUS: "dashed",
    Region.MISHAP: "dotted",
}


def _dot_quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(model: RiskStructure, regions: Optional[RegionAssignment] = None) -> str:
    """Render the model as deterministic DOT; node borders follow the region
    (safe solid, hazardous dashed, mishap dotted), initial states are
    double-bordered, and edges are labeled ``name(pr,cs)``."""
    if regions is None:
        regions = assign_regions(model)
    label = model.label
    lines = ["digraph risk_structure {", "  rankdir=LR;", "  node [shape=ellipse];"]
    for s in model.sorted_states():
        attrs = [f"style={_REGION_STYLE[regions[s]]}"]
        if s in model.initial:
            attrs.append("peripheries=2")
        lines.append(f"  {_dot_quote(label(s))} [{', '.join(attrs)}];")
    for t in sorted(
        model.transitions,
        key=lambda t: (label(t.source), t.action.name, label(t.target)),
    ):
        weights = []
        if t.pr is not None:
            weights.append(f"{fmt_prob(t.pr):.6g}")
        if t.cs is not None:
            weights.append(str(t.cs))
        text = t.action.name + (f"({','.join(weights)})" if weights else "")
        lines.append(
            f"  {_dot_quote(label(t.source))} -> {_dot_quote(label(t.target))} "
            f"[label={_dot_quote(text)}];"
        )
    lines.append("}")
    return "\n".join(lines) + "\n"
