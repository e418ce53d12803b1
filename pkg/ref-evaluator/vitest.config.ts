import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["test/**/*.test.ts"],
    // protocol and end-to-end tests train many tiny networks
    testTimeout: 600_000,
    hookTimeout: 120_000,
  },
});
