// In-memory stand-in for the chat service, speaking the same /v1 contract
// at the fetch level. The transcript lives here, never in the client, so
// tests can verify the UI state is exactly what the service returned.

import type { FetchLike, PreviewLane, SpanPayload, TranscriptTurn } from '../src/api';

export interface ScriptedReply {
  reply: string;
  spans: SpanPayload | null;
}

export interface RecordedPost {
  text: string;
  ecg_refs: string[];
}

const json = (body: unknown, status = 200): Response =>
  new Response(JSON.stringify(body), {
    status,
    headers: { 'Content-Type': 'application/json' },
  });

const errorJson = (status: number, type: string, message: string): Response =>
  json({ error: { type, message } }, status);

export class MockService {
  turns: TranscriptTurn[] = [];
  replies: ScriptedReply[] = [];
  posts: RecordedPost[] = [];
  uploadPreview: PreviewLane[] = [
    { lead: 'I', points: [[0, 0.1], [1, -0.2]] },
    { lead: 'II', points: [[0, 0.3], [1, 0.0]] },
  ];
  uploadLeads = ['I', 'II'];
  getCount = 0;
  counter = 0;
  failNext: 'network' | 'overflow' | null = null;
  /** When set, the message route waits on it before answering. */
  gate: Promise<void> | null = null;
  /** Server-side canonical form of user text, to prove clients re-fetch. */
  normalize: (text: string) => string = (text) => text;

  readonly fetch: FetchLike = async (url, init) => {
    const u = new URL(url);
    const method = init?.method ?? 'GET';
    const path = u.pathname;

    if (method === 'GET' && path === '/healthz') return json({ status: 'ok' });

    if (method === 'POST' && path === '/v1/session') {
      this.counter += 1;
      return json({ session_id: `s${String(this.counter).padStart(4, '0')}` });
    }

    if (method === 'GET' && /^\/v1\/session\/s\d+$/.test(path)) {
      this.getCount += 1;
      return json(this.transcriptBody(path.split('/').pop()!));
    }

    if (method === 'POST' && /^\/v1\/session\/s\d+\/message$/.test(path)) {
      if (this.failNext === 'network') {
        this.failNext = null;
        throw new TypeError('fetch failed');
      }
      if (this.failNext === 'overflow') {
        this.failNext = null;
        return errorJson(413, 'context_overflow', 'sequence of 999 tokens exceeds context length 256');
      }
      if (this.gate) await this.gate;
      const body = JSON.parse(String(init?.body)) as RecordedPost;
      this.posts.push(body);
      const scripted = this.replies.shift() ?? { reply: 'ok', spans: null };
      this.turns.push({
        role: 'user',
        text: this.normalize(body.text),
        ecg_refs: body.ecg_refs,
        spans: null,
      });
      this.turns.push({
        role: 'assistant',
        text: scripted.reply,
        ecg_refs: [],
        spans: scripted.spans,
      });
      return json(scripted);
    }

    if (method === 'POST' && path === '/v1/ecg') {
      if (u.searchParams.get('format') === null) {
        return errorJson(422, 'unknown_format', 'format query parameter required');
      }
      this.counter += 1;
      return json({
        ref: `ecg${String(this.counter).padStart(4, '0')}`,
        record_id: 'up01',
        duration: 10.0,
        leads: this.uploadLeads,
        preview: this.uploadPreview,
      });
    }

    return errorJson(404, 'unknown_session', `no route ${method} ${path}`);
  };

  transcriptBody(sessionId: string): { session_id: string; turns: TranscriptTurn[] } {
    // deep copy so callers cannot share structure with the "server"
    return JSON.parse(JSON.stringify({ session_id: sessionId, turns: this.turns }));
  }
}
