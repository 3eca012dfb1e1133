export type Point = [number, number];

export interface GridInfo {
  min_x: number;
  min_y: number;
  max_x: number;
  max_y: number;
  rows: number;
  cols: number;
}

export interface NetworkInfo {
  nodes: Point[];
  segments: [number, number][];
  bbox: [number, number, number, number];
}

export interface StatsInfo {
  candidates: number;
  embedding_width: number;
  modalities: string[];
  supported_subsets: string[];
  checkpoint_fingerprint: string;
  store_fingerprints: Record<string, string>;
  road_vocab: number;
  grid_cells: number;
}

export interface TrajectoryInfo {
  id: number;
  points: Point[];
  road: number[] | null;
  region: number[] | null;
  topology: Point[] | null;
}

export interface QueryResultItem {
  id: number;
  score: number;
}

export interface QueryResponse {
  results: QueryResultItem[];
  provenance: Record<string, unknown>;
}

export interface TwoStageSpec {
  coarse: "road" | "region";
  subset: number;
}

/** Client-side mirror of the service QuerySpec validity rules. */
export interface QueryDraft {
  roadIds: number[];
  regionIds: number[];
  topologyPoints: Point[];
  k: number;
  twoStage: TwoStageSpec | null;
}

/** A retrieved trajectory joined with its geometry and coverage badge. */
export interface ResultOverlay {
  rank: number;
  id: number;
  score: number;
  trajectory: TrajectoryInfo;
  badge: number | null;
}
