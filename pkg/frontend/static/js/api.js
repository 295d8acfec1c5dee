export class ApiError extends Error {
    constructor(status, detail) {
        super(detail);
        this.status = status;
    }
}
async function request(url, init) {
    const resp = await fetch(url, {
        headers: { "Content-Type": "application/json" },
        ...init,
    });
    const body = await resp.json().catch(() => ({}));
    if (!resp.ok) {
        throw new ApiError(resp.status, body.detail ?? resp.statusText);
    }
    return body;
}
export class TestClient {
    constructor(baseUrl = "") {
        this.baseUrl = baseUrl;
    }
    async startSession(expertise) {
        const body = await request(`${this.baseUrl}/api/session`, {
            method: "POST",
            body: JSON.stringify({ expertise }),
        });
        return body.session_id;
    }
    currentRound(sessionId) {
        return request(`${this.baseUrl}/api/session/${sessionId}/round`);
    }
    async answer(sessionId, pairId, choice) {
        await request(`${this.baseUrl}/api/session/${sessionId}/round`, {
            method: "POST",
            body: JSON.stringify({ pair_id: pairId, choice }),
        });
    }
    result(sessionId) {
        return request(`${this.baseUrl}/api/session/${sessionId}/result`);
    }
}
