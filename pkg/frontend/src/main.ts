import { ApiClient, ApiError } from "./api.js";
import { coverageBadges } from "./coverage.js";
import {
  addTopologyPoint,
  draftModalities,
  emptyDraft,
  isSubmittable,
  parseDraft,
  serializeDraft,
  setK,
  setTwoStage,
  toggleRegion,
  toggleRoad,
} from "./state.js";
import { MapView } from "./render.js";
import type { QueryDraft, ResultOverlay, TrajectoryInfo } from "./types.js";

type Mode = "road" | "region" | "topology";

const SERVICE_URL =
  new URLSearchParams(window.location.search).get("service") ??
  "http://127.0.0.1:8765";

const api = new ApiClient(SERVICE_URL);

let draft: QueryDraft = parseDraft(window.location.hash);
let mode: Mode = "road";
let map: MapView | null = null;
let lastResults: ResultOverlay[] = [];

const el = (id: string) => document.getElementById(id)!;

function syncControls(): void {
  (el("k-input") as HTMLInputElement).value = String(draft.k);
  (el("two-stage-toggle") as HTMLInputElement).checked = draft.twoStage !== null;
  (el("coarse-select") as HTMLSelectElement).value = draft.twoStage?.coarse ?? "road";
  (el("subset-input") as HTMLInputElement).value = String(draft.twoStage?.subset ?? 20);
  (el("submit-btn") as HTMLButtonElement).disabled = !isSubmittable(draft);
  el("draft-summary").textContent =
    `roads: ${draft.roadIds.length}  regions: ${draft.regionIds.length}  ` +
    `sketch points: ${draft.topologyPoints.length}`;
  for (const m of ["road", "region", "topology"] as Mode[]) {
    el(`mode-${m}`).classList.toggle("active", mode === m);
  }
}

function applyDraft(next: QueryDraft): void {
  draft = next;
  window.location.hash = serializeDraft(draft);
  map?.setDraft(draft);
  syncControls();
}

function badgeFor(t: TrajectoryInfo): number | null {
  if (draft.roadIds.length && t.road)
    return coverageBadges(draft.roadIds, [t.road]).perResult[0];
  if (draft.regionIds.length && t.region)
    return coverageBadges(draft.regionIds, [t.region]).perResult[0];
  return null;
}

function renderResultPanel(provenance: Record<string, unknown>): void {
  const banner = el("provenance");
  const stage = provenance["stage"] === "two-stage"
    ? `two-stage (coarse ${provenance["coarse_modality"]}, subset ${provenance["subset_size"]})`
    : "single stage";
  banner.textContent =
    `${stage} | query modalities: ${(provenance["query_modalities"] as string[]).join("+")}`;

  const list = el("results-list");
  list.replaceChildren();
  const conditionIds = draft.roadIds.length ? draft.roadIds : draft.regionIds;
  const sets = lastResults.map((o) =>
    draft.roadIds.length ? o.trajectory.road : o.trajectory.region,
  );
  const unionBadge =
    conditionIds.length > 0 ? coverageBadges(conditionIds, sets).union : null;
  for (const overlay of lastResults) {
    const li = document.createElement("li");
    const badge = overlay.badge === null ? "" : ` CR ${overlay.badge.toFixed(2)}`;
    li.textContent = `#${overlay.rank} id=${overlay.id} score=${overlay.score.toFixed(4)}${badge}`;
    list.appendChild(li);
  }
  el("union-badge").textContent =
    unionBadge === null ? "" : `CR@${draft.k} (union): ${unionBadge.toFixed(2)}`;
}

async function submit(): Promise<void> {
  if (!isSubmittable(draft)) return;
  el("status").textContent = "querying...";
  try {
    const response = await api.query(draft);
    const overlays: ResultOverlay[] = [];
    for (const [i, item] of response.results.entries()) {
      const trajectory = await api.trajectory(item.id);
      overlays.push({
        rank: i + 1,
        id: item.id,
        score: item.score,
        trajectory,
        badge: badgeFor(trajectory),
      });
    }
    lastResults = overlays;
    map?.renderResults(overlays);
    renderResultPanel(response.provenance);
    el("status").textContent = `${overlays.length} results`;
  } catch (err) {
    if (err instanceof DOMException && err.name === "AbortError") return;
    if (err instanceof ApiError && err.status === 422) {
      const payload = err.payload as { supported_subsets?: string[] };
      el("status").textContent =
        `unsupported modality combination (${draftModalities(draft).join("+")}); ` +
        `supported: ${(payload?.supported_subsets ?? []).join(", ")}`;
      return;
    }
    el("status").textContent = `query failed: ${String(err)}`;
  }
}

function wireControls(): void {
  for (const m of ["road", "region", "topology"] as Mode[]) {
    el(`mode-${m}`).addEventListener("click", () => {
      mode = m;
      syncControls();
    });
  }
  (el("k-input") as HTMLInputElement).addEventListener("change", (ev) => {
    applyDraft(setK(draft, Number((ev.target as HTMLInputElement).value)));
  });
  const readTwoStage = () => {
    if (!(el("two-stage-toggle") as HTMLInputElement).checked) return null;
    return {
      coarse: (el("coarse-select") as HTMLSelectElement).value as "road" | "region",
      subset: Number((el("subset-input") as HTMLInputElement).value),
    };
  };
  for (const id of ["two-stage-toggle", "coarse-select", "subset-input"]) {
    el(id).addEventListener("change", () => applyDraft(setTwoStage(draft, readTwoStage())));
  }
  el("clear-btn").addEventListener("click", () => {
    lastResults = [];
    map?.clearResults();
    applyDraft(emptyDraft());
  });
  el("submit-btn").addEventListener("click", () => void submit());
}

async function boot(): Promise<void> {
  el("retry-screen").classList.add("hidden");
  try {
    const [stats, network, grid] = await Promise.all([
      api.stats(),
      api.network(),
      api.grid(),
    ]);
    el("stats-banner").textContent =
      `${stats.candidates} candidates | checkpoint ${stats.checkpoint_fingerprint.slice(0, 8)} | ` +
      `subsets: ${stats.supported_subsets.join(", ")}`;
    const svg = el("map") as unknown as SVGSVGElement;
    svg.replaceChildren();
    map = new MapView(document, svg, network, grid, {
      onSegmentClick: (id) => {
        if (mode === "road") applyDraft(toggleRoad(draft, id));
      },
      onCellClick: (id) => {
        if (mode === "region") applyDraft(toggleRegion(draft, id));
      },
      onCanvasClick: (p) => {
        if (mode === "topology") applyDraft(addTopologyPoint(draft, p));
      },
    });
    map.setDraft(draft);
    syncControls();
  } catch {
    el("retry-screen").classList.remove("hidden");
  }
}

el("retry-btn").addEventListener("click", () => void boot());
wireControls();
void boot();
