package org.example.auth;

public class AdminUser extends User {
    private final String[] scopes;

    public AdminUser(String name, String passwordHash, String[] scopes) {
        super(name, passwordHash);
        this.scopes = scopes;
    }

    public boolean hasScope(String scope) {
        for (String s : scopes) {
            if (s.equals(scope)) {
                return true;
            }
        }
        return false;
    }
}
