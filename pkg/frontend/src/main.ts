// Single-page wiring: upload/select ECGs, render waveform lanes with span
// overlays, and hold the conversation. All state changes go through the
// service; this file only draws.

import { ApiClient, SpanPayload, TranscriptTurn, UploadFormat, UploadedEcg } from './api.js';
import { MAX_ATTACHMENTS, SessionController, displayTurnText } from './session.js';
import { Viewport, decimateMinMax, focusSpan, orderLanes, spanBands } from './waveform.js';

const LANE_HEIGHT = 70;
const LANE_WIDTH = 640;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  cls?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  if (text !== undefined) node.textContent = text;
  return node;
}

function must<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

class Page {
  private api: ApiClient;
  private controller: SessionController;
  private previewed: UploadedEcg | null = null;
  private viewport: Viewport | null = null;
  private activeSpans: SpanPayload | null = null;

  constructor(baseUrl: string) {
    this.api = new ApiClient(baseUrl);
    this.controller = new SessionController(this.api);
  }

  async start(): Promise<void> {
    await this.controller.open();
    must<HTMLDivElement>('session-label').textContent =
      `session ${this.controller.sessionId ?? '?'}`;
    this.renderAll();
  }

  private renderAll(): void {
    this.renderLibrary();
    this.renderChips();
    this.renderTranscript();
    this.renderWaveform();
    this.renderStatus();
  }

  // ---- library / picker ----

  private async onUpload(file: File): Promise<void> {
    const format: UploadFormat = file.name.endsWith('.ecgb')
      ? 'interchange-binary'
      : 'columnar-text';
    const bytes = await file.arrayBuffer();
    try {
      const up = await this.controller.upload(bytes, format);
      this.previewed = up;
      this.viewport = null;
      this.activeSpans = null;
    } catch (err) {
      this.flash(`upload rejected: ${err instanceof Error ? err.message : String(err)}`);
    }
    this.renderAll();
  }

  private renderLibrary(): void {
    const list = must<HTMLUListElement>('library');
    list.replaceChildren();
    for (const up of this.controller.library.values()) {
      const item = el('li', 'library-item');
      const label = el(
        'span',
        up === this.previewed ? 'record selected' : 'record',
        `${up.ref} (${up.record_id}, ${up.duration.toFixed(1)} s, ${up.leads.length} leads)`,
      );
      label.onclick = () => {
        this.previewed = up;
        this.viewport = null;
        this.activeSpans = null;
        this.renderAll();
      };
      const attach = el('button', 'attach', 'attach');
      attach.onclick = () => {
        if (!this.controller.attach(up.ref)) {
          this.flash(`attachment rejected: at most ${MAX_ATTACHMENTS} ECGs per message`);
        }
        this.renderChips();
      };
      item.append(label, attach);
      list.append(item);
    }
  }

  private renderChips(): void {
    const chips = must<HTMLDivElement>('chips');
    chips.replaceChildren();
    for (const ref of this.controller.attachments) {
      const chip = el('span', 'chip', ref);
      const remove = el('button', 'chip-remove', '×');
      remove.onclick = () => {
        this.controller.detach(ref);
        this.renderChips();
      };
      chip.append(remove);
      chips.append(chip);
    }
  }

  // ---- transcript ----

  private renderTranscript(): void {
    const panel = must<HTMLDivElement>('transcript');
    panel.replaceChildren();
    const transcript = this.controller.transcript;
    if (!transcript) return;
    for (const turn of transcript.turns) {
      panel.append(this.renderTurn(turn));
    }
    panel.scrollTop = panel.scrollHeight;
  }

  private renderTurn(turn: TranscriptTurn): HTMLElement {
    const node = el('div', `turn ${turn.role}`);
    node.append(el('div', 'turn-role', turn.role));
    node.append(el('div', 'turn-text', displayTurnText(turn.text)));
    if (turn.ecg_refs.length > 0) {
      node.append(el('div', 'turn-refs', turn.ecg_refs.join(' ')));
    }
    // overlays come from the structured payload only, never from the prose
    const spans = turn.spans;
    if (spans && !spans.not_found && spans.intervals.length > 0) {
      const row = el('div', 'span-row');
      for (const interval of spans.intervals) {
        const [s, e] = interval;
        const link = el('button', 'span-link', `${s.toFixed(1)}s-${e.toFixed(1)}s`);
        link.onclick = () => this.focus(interval, spans);
        row.append(link);
      }
      node.append(row);
    } else if (turn.spans && turn.spans.not_found) {
      node.append(el('div', 'span-row not-found', 'not found'));
    }
    return node;
  }

  private focus(interval: [number, number], spans: SpanPayload | null): void {
    if (!this.previewed) return;
    this.activeSpans = spans;
    this.viewport = focusSpan(interval, this.previewed.duration);
    this.renderWaveform();
  }

  // ---- waveform ----

  private renderWaveform(): void {
    const host = must<HTMLDivElement>('waveform');
    host.replaceChildren();
    const up = this.previewed;
    if (!up) {
      host.append(el('div', 'placeholder', 'upload an ECG to see its waveform'));
      return;
    }
    const vp: Viewport = this.viewport ?? { start: 0, end: up.duration, cursor: 0 };
    const toX = (t: number): number =>
      ((t - vp.start) / (vp.end - vp.start || 1)) * LANE_WIDTH;
    const bands = spanBands(this.activeSpans, up.duration, LANE_WIDTH);
    for (const lane of orderLanes(up.preview)) {
      const wrap = el('div', 'lane');
      wrap.append(el('span', 'lane-label', lane.lead));
      const canvas = el('canvas');
      canvas.width = LANE_WIDTH;
      canvas.height = LANE_HEIGHT;
      const ctx = canvas.getContext('2d');
      if (ctx) this.drawLane(ctx, lane.points, bands, vp, toX);
      wrap.append(canvas);
      host.append(wrap);
    }
    const reset = el('button', 'reset-view', 'full record');
    reset.onclick = () => {
      this.viewport = null;
      this.renderWaveform();
    };
    host.append(reset);
  }

  private drawLane(
    ctx: CanvasRenderingContext2D,
    points: [number, number][],
    bands: { start: number; end: number; label: string }[],
    vp: Viewport,
    toX: (t: number) => number,
  ): void {
    ctx.clearRect(0, 0, LANE_WIDTH, LANE_HEIGHT);
    ctx.fillStyle = 'rgba(214, 106, 77, 0.25)';
    for (const band of bands) {
      const x0 = Math.max(0, toX(band.start));
      const x1 = Math.min(LANE_WIDTH, toX(band.end));
      if (x1 > x0) ctx.fillRect(x0, 0, x1 - x0, LANE_HEIGHT);
    }
    const visible = points.filter(([t]) => t >= vp.start && t <= vp.end);
    const columns = decimateMinMax(visible, LANE_WIDTH);
    ctx.strokeStyle = '#2b7a78';
    ctx.beginPath();
    for (const col of columns) {
      const x = toX(col.t);
      const yMin = LANE_HEIGHT / 2 - (col.max * LANE_HEIGHT) / 2.2;
      const yMax = LANE_HEIGHT / 2 - (col.min * LANE_HEIGHT) / 2.2;
      ctx.moveTo(x, yMin);
      ctx.lineTo(x, yMax + 0.5);
    }
    ctx.stroke();
    if (this.viewport) {
      const x = toX(vp.cursor);
      ctx.strokeStyle = '#d66a4d';
      ctx.beginPath();
      ctx.moveTo(x, 0);
      ctx.lineTo(x, LANE_HEIGHT);
      ctx.stroke();
    }
  }

  // ---- composer ----

  private async onSend(): Promise<void> {
    const input = must<HTMLTextAreaElement>('composer-text');
    const text = input.value.trim();
    if (text === '' || this.controller.busy) return;
    try {
      await this.controller.send(text);
      input.value = '';
    } catch (err) {
      this.flash(err instanceof Error ? err.message : String(err));
    }
    this.renderAll();
  }

  private renderStatus(): void {
    const status = must<HTMLDivElement>('status');
    status.replaceChildren();
    if (this.controller.notice) {
      status.append(el('div', 'notice', this.controller.notice));
    }
    if (this.controller.retryable) {
      const retry = el('button', 'retry', 'retry last message');
      retry.onclick = async () => {
        await this.controller.retry();
        this.renderAll();
      };
      status.append(el('div', 'notice', 'message not delivered (network)'), retry);
    }
    must<HTMLButtonElement>('composer-send').disabled = this.controller.busy;
  }

  private flash(message: string): void {
    const status = must<HTMLDivElement>('status');
    status.replaceChildren(el('div', 'notice', message));
  }

  wire(): void {
    must<HTMLInputElement>('upload-input').addEventListener('change', (ev) => {
      const input = ev.target as HTMLInputElement;
      const file = input.files?.[0];
      if (file) void this.onUpload(file);
      input.value = '';
    });
    must<HTMLButtonElement>('composer-send').addEventListener('click', () => {
      void this.onSend();
    });
    must<HTMLTextAreaElement>('composer-text').addEventListener('keydown', (ev) => {
      if (ev.key === 'Enter' && !ev.shiftKey) {
        ev.preventDefault();
        void this.onSend();
      }
    });
  }
}

const base =
  new URLSearchParams(window.location.search).get('api') ?? 'http://127.0.0.1:8000';
const page = new Page(base);
page.wire();
void page.start().catch((err) => {
  const status = document.getElementById('status');
  if (status) status.textContent = `cannot reach the chat service at ${base}: ${err}`;
});
