package org.example.auth.token;

/*
 * Splits "user:uuid" token strings.
 */
public class TokenParser {
    private static final char SEP = ':';

    public String username(String raw) {
        int idx = raw.indexOf(SEP);
        return idx < 0 ? raw : raw.substring(0, idx);
    }

    public String nonce(String raw) {
        int idx = raw.indexOf(SEP);
        return idx < 0 ? "" : raw.substring(idx + 1);
    }
}
