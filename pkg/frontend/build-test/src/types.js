/** Wire types mirroring the service's JSON bodies (docs/api.md). */
export {};
