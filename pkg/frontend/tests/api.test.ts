import { describe, expect, it } from 'vitest';

import { ApiClient, ApiError } from '../src/api';
import { MockService } from './mock-service';

describe('api client', () => {
  it('uploads raw bytes with the format in the query string', async () => {
    const service = new MockService();
    let seenUrl = '';
    const client = new ApiClient('http://svc', (url, init) => {
      seenUrl = url;
      return service.fetch(url, init);
    });
    const up = await client.uploadEcg(new Uint8Array([7]), 'interchange-binary');
    expect(seenUrl).toBe('http://svc/v1/ecg?format=interchange-binary');
    expect(up.ref).toMatch(/^ecg\d+$/);
    expect(up.leads).toEqual(['I', 'II']);
    expect(up.preview).toHaveLength(2);
  });

  it('passes a one-shot question through the query string', async () => {
    const service = new MockService();
    let seenUrl = '';
    const client = new ApiClient('http://svc', (url, init) => {
      seenUrl = url;
      return service.fetch(url, init);
    });
    await client.uploadEcg(new Uint8Array([7]), 'columnar-text', 'What is this ?');
    const params = new URL(seenUrl).searchParams;
    expect(params.get('format')).toBe('columnar-text');
    expect(params.get('question')).toBe('What is this ?');
  });

  it('surfaces the structured error type from the service', async () => {
    const client = new ApiClient('http://svc', () =>
      Promise.resolve(
        new Response(
          JSON.stringify({ error: { type: 'unknown_session', message: "no session 's9'" } }),
          { status: 404 },
        ),
      ),
    );
    const err = await client.getTranscript('s9').catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).kind).toBe('unknown_session');
    expect((err as ApiError).status).toBe(404);
  });

  it('classifies unreachable services as network errors', async () => {
    const client = new ApiClient('http://svc', () => Promise.reject(new TypeError('fetch failed')));
    const err = await client.health().catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).kind).toBe('network');
  });
});
