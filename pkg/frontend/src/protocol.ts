// Wire types for the /v1/session channel.  Field names mirror the server's
// JSON exactly; x is the column axis, y the row axis, in image pixels.

export interface Rle {
  size: [number, number]; // [H, W]
  rle: number[]; // alternating runs, background first
}

export interface Viewport {
  offset_x: number;
  offset_y: number;
  scale: number;
  display_density: number;
}

export interface StrategyConfig {
  kind:
    | "accumulate_sample"
    | "linear_combo"
    | "incremental"
    | "fixation_replace"
    | "fixation_accumulate";
  capacity: number;
  alpha: number;
  k: number;
  label_mode: "fixed_ones" | "random_binary";
  send_prior_mask: boolean;
}

export type ClientMsg =
  | { type: "hello"; client: string; proto: 1 }
  | { type: "load_case"; case_id: string; slice_index: number; viewport?: Partial<Viewport> }
  | { type: "start_structure"; structure: string; mode: "gaze" | "bbox"; strategy?: Partial<StrategyConfig> }
  | { type: "gaze"; samples: [number, number, number][] } // [t, x, y] screen coords
  | { type: "box"; r0: number; c0: number; r1: number; c1: number }
  | { type: "key"; name: "Enter" };

export type ServerMsg =
  | { type: "case_loaded"; image_png_b64: string; H: number; W: number; viewport: Viewport }
  | { type: "mask"; iteration: number; rle: Rle; dice: number | null; latency_ms: number }
  | { type: "done"; elapsed_ms: number; final_rle: Rle; dice: number | null }
  | { type: "error"; code: string; detail: string };

export const DEFAULT_STRATEGY: StrategyConfig = {
  kind: "accumulate_sample",
  capacity: 20,
  alpha: 0.6,
  k: 2,
  label_mode: "fixed_ones",
  send_prior_mask: false,
};
