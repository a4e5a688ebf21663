/** Thin client over the wire API.
 *
 * The console holds no authority of its own: every call goes to the
 * service, every mutating call carries the session's operator identity
 * in `X-Operator`, and failures surface the server's error envelope
 * verbatim as an {@link ApiError}. Authorization lives server-side.
 */
export class ApiError extends Error {
    constructor(envelope) {
        super(envelope.message);
        this.code = envelope.code;
        this.detail = envelope.detail;
    }
}
export class Unreachable extends Error {
}
export class ApiClient {
    constructor(session, fetchImpl = (url, init) => fetch(url, init)) {
        this.session = session;
        this.fetchImpl = fetchImpl;
        if (!session.operator) {
            throw new Error("a console session requires an operator identity");
        }
    }
    get operator() {
        return this.session.operator;
    }
    async request(method, path, body) {
        const headers = { "X-Operator": this.session.operator };
        const init = { method, headers };
        if (body !== undefined) {
            headers["Content-Type"] = "application/json";
            init.body = JSON.stringify(body);
        }
        let response;
        try {
            response = await this.fetchImpl(this.session.baseUrl + path, init);
        }
        catch (error) {
            throw new Unreachable(`API unreachable: ${String(error)}`);
        }
        const text = await response.text();
        let parsed = null;
        if (text) {
            try {
                parsed = JSON.parse(text);
            }
            catch {
                throw new ApiError({
                    code: "bad_response",
                    message: `non-JSON response (${response.status})`,
                    detail: text.slice(0, 200),
                });
            }
        }
        if (!response.ok) {
            throw new ApiError(parsed);
        }
        return parsed;
    }
    get(path) {
        return this.request("GET", path);
    }
    post(path, body = {}) {
        return this.request("POST", path, body);
    }
    // -- reads -------------------------------------------------------
    healthz() {
        return this.get("/healthz");
    }
    async agents() {
        const body = await this.get("/agents");
        return body.agents;
    }
    agentDetail(agentId) {
        return this.get(`/agents/${agentId}`);
    }
    async overlaps(agentId, threshold) {
        const body = await this.get(`/agents/${agentId}/overlaps?threshold=${threshold}`);
        return body.overlaps;
    }
    pending() {
        return this.get("/pending");
    }
    async kpi(start, end) {
        const body = await this.get(`/kpi?start=${start}&end=${end}`);
        return body.snapshot;
    }
    async maturity(start, end) {
        const body = await this.get(`/maturity?start=${start}&end=${end}`);
        return body.assessment;
    }
    auditEvents(params) {
        const query = new URLSearchParams();
        if (params.kinds)
            query.set("kinds", params.kinds);
        if (params.agent_id)
            query.set("agent_id", params.agent_id);
        if (params.limit)
            query.set("limit", String(params.limit));
        const suffix = query.toString() ? `?${query.toString()}` : "";
        return this.get(`/audit/events${suffix}`);
    }
    verifyChain() {
        return this.get("/audit/verify");
    }
    // -- actions ------------------------------------------------------
    async approveAgent(agentId, input) {
        const now = (await this.healthz()).now;
        const body = await this.post(`/agents/${agentId}/approve`, {
            accountable_owner: input.owner,
            liability_owner: input.liability,
            expiration: now + input.expiresInDays * 86400,
            baseline: {
                policy_version: input.policyVersion,
                model_id: input.modelId,
                prompt_hash: input.promptHashHex,
                config_hash: input.configHashHex,
                approved_at: now,
            },
        });
        return body.agent;
    }
    async transition(agentId, event) {
        const body = await this.post(`/agents/${agentId}/transition`, { event });
        return body.state;
    }
    /** Kill switch. The UI must set `confirmed` only after an explicit
     * confirmation step; this guard keeps shortcuts out of the codebase. */
    async fireKillSwitch(agentId, reason, confirmed) {
        if (!confirmed) {
            throw new Error("kill switch requires explicit confirmation");
        }
        const body = await this.post(`/agents/${agentId}/kill`, { trigger_id: "manual", reason });
        return body.kill_report;
    }
    async decommission(agentId, reason, confirmed) {
        if (!confirmed) {
            throw new Error("decommission requires explicit confirmation");
        }
        const body = await this.post(`/agents/${agentId}/decommission`, { reason });
        return body.termination_report;
    }
    async submitVerdict(targetId, verdict, note) {
        const body = await this.post(`/pending/${targetId}/verdict`, { verdict, note });
        return body.result;
    }
    async checkDrift(agentId, observed) {
        return this.post(`/agents/${agentId}/drift-check`, { observed });
    }
}
