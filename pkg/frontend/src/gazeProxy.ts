// Mouse-as-gaze proxy: samples the last pointer position on a 90 Hz timer
// and ships batches every 100 ms, matching the tracker cadence the session
// protocol expects.  Timers and the clock are injected so the logic is
// testable without a browser.

export type Batch = [number, number, number][]; // [t, x, y] screen coords

export interface ProxyOptions {
  sampleHz?: number;
  batchMs?: number;
  bufferMs?: number; // drop-oldest horizon while disconnected
  now?: () => number;
  setInterval?: (fn: () => void, ms: number) => number;
  clearInterval?: (id: number) => void;
}

export class GazeProxy {
  private readonly sampleHz: number;
  private readonly batchMs: number;
  private readonly bufferMs: number;
  private readonly now: () => number;
  private readonly setIntervalFn: (fn: () => void, ms: number) => number;
  private readonly clearIntervalFn: (id: number) => void;

  private pointer: { x: number; y: number } | null = null;
  private pending: Batch = [];
  private buffered: Batch[] = [];
  private sampleTimer: number | null = null;
  private batchTimer: number | null = null;
  private sink: ((batch: Batch) => boolean) | null = null;

  constructor(opts: ProxyOptions = {}) {
    this.sampleHz = opts.sampleHz ?? 90;
    this.batchMs = opts.batchMs ?? 100;
    this.bufferMs = opts.bufferMs ?? 2000;
    this.now = opts.now ?? (() => performance.now());
    this.setIntervalFn = opts.setInterval ?? ((fn, ms) => window.setInterval(fn, ms));
    this.clearIntervalFn = opts.clearInterval ?? ((id) => window.clearInterval(id));
  }

  /** sink returns false when the channel is down; batches then buffer. */
  start(sink: (batch: Batch) => boolean): void {
    if (this.sampleTimer !== null) return;
    this.sink = sink;
    this.sampleTimer = this.setIntervalFn(() => this.sampleOnce(), 1000 / this.sampleHz);
    this.batchTimer = this.setIntervalFn(() => this.flush(), this.batchMs);
  }

  stop(): void {
    if (this.sampleTimer !== null) this.clearIntervalFn(this.sampleTimer);
    if (this.batchTimer !== null) this.clearIntervalFn(this.batchTimer);
    this.sampleTimer = null;
    this.batchTimer = null;
    this.pending = [];
    this.sink = null;
  }

  get running(): boolean {
    return this.sampleTimer !== null;
  }

  movePointer(x: number, y: number): void {
    this.pointer = { x, y };
  }

  private sampleOnce(): void {
    if (!this.pointer) return;
    this.pending.push([this.now(), this.pointer.x, this.pointer.y]);
  }

  private flush(): void {
    if (this.pending.length === 0) return;
    const batch = this.pending;
    this.pending = [];
    this.buffered.push(batch);
    this.trimBuffer();
    if (!this.sink) return;
    while (this.buffered.length > 0) {
      if (!this.sink(this.buffered[0])) break; // channel down, keep buffering
      this.buffered.shift();
    }
  }

  private trimBuffer(): void {
    // keep at most bufferMs worth of batches, dropping the oldest first
    const maxBatches = Math.max(1, Math.floor(this.bufferMs / this.batchMs));
    while (this.buffered.length > maxBatches) {
      this.buffered.shift();
    }
  }

  get bufferedBatchCount(): number {
    return this.buffered.length;
  }
}
