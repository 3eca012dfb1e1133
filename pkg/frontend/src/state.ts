import type { Point, QueryDraft, TwoStageSpec } from "./types.js";

export function emptyDraft(): QueryDraft {
  return { roadIds: [], regionIds: [], topologyPoints: [], k: 5, twoStage: null };
}

function toggled(list: number[], id: number): number[] {
  return list.includes(id) ? list.filter((v) => v !== id) : [...list, id];
}

export function toggleRoad(draft: QueryDraft, id: number): QueryDraft {
  return { ...draft, roadIds: toggled(draft.roadIds, id) };
}

export function toggleRegion(draft: QueryDraft, id: number): QueryDraft {
  return { ...draft, regionIds: toggled(draft.regionIds, id) };
}

export function addTopologyPoint(draft: QueryDraft, p: Point): QueryDraft {
  return { ...draft, topologyPoints: [...draft.topologyPoints, p] };
}

export function clearTopology(draft: QueryDraft): QueryDraft {
  return { ...draft, topologyPoints: [] };
}

export function setK(draft: QueryDraft, k: number): QueryDraft {
  return { ...draft, k };
}

export function setTwoStage(draft: QueryDraft, spec: TwoStageSpec | null): QueryDraft {
  return { ...draft, twoStage: spec };
}

/** Modalities present in the draft, in the service's canonical order. */
export function draftModalities(draft: QueryDraft): string[] {
  const out: string[] = [];
  if (draft.topologyPoints.length > 0) out.push("top");
  if (draft.roadIds.length > 0) out.push("road");
  if (draft.regionIds.length > 0) out.push("region");
  return out;
}

/** Mirror of the service rules: at least one modality, k >= 1, and a
 * two-stage request needs its coarse modality present with subset >= k. */
export function isSubmittable(draft: QueryDraft): boolean {
  if (draft.k < 1) return false;
  if (draftModalities(draft).length === 0) return false;
  if (draft.twoStage) {
    const payload =
      draft.twoStage.coarse === "road" ? draft.roadIds : draft.regionIds;
    if (payload.length === 0) return false;
    if (draft.twoStage.subset < draft.k) return false;
  }
  return true;
}

const num = (v: number) => String(v);

/** Serialize a draft into a shareable URL hash fragment. Every state
 * reachable by clicks round-trips through this string. */
export function serializeDraft(draft: QueryDraft): string {
  const parts: string[] = [];
  if (draft.roadIds.length) parts.push(`road=${draft.roadIds.map(num).join(".")}`);
  if (draft.regionIds.length) parts.push(`region=${draft.regionIds.map(num).join(".")}`);
  if (draft.topologyPoints.length)
    parts.push(
      `top=${draft.topologyPoints.map(([x, y]) => `${x},${y}`).join(";")}`,
    );
  parts.push(`k=${draft.k}`);
  if (draft.twoStage)
    parts.push(`coarse=${draft.twoStage.coarse}.${draft.twoStage.subset}`);
  return parts.join("&");
}

export function parseDraft(hash: string): QueryDraft {
  const draft = emptyDraft();
  const clean = hash.replace(/^#/, "");
  if (!clean) return draft;
  for (const part of clean.split("&")) {
    const eq = part.indexOf("=");
    if (eq < 0) continue;
    const key = part.slice(0, eq);
    const value = part.slice(eq + 1);
    if (!value) continue;
    if (key === "road") draft.roadIds = value.split(".").map(Number);
    else if (key === "region") draft.regionIds = value.split(".").map(Number);
    else if (key === "top")
      draft.topologyPoints = value.split(";").map((pair) => {
        const [x, y] = pair.split(",").map(Number);
        return [x, y] as Point;
      });
    else if (key === "k") draft.k = Number(value);
    else if (key === "coarse") {
      const [coarse, subset] = value.split(".");
      if (coarse === "road" || coarse === "region")
        draft.twoStage = { coarse, subset: Number(subset) };
    }
  }
  return draft;
}
