package org.example.auth;

import java.util.Set;
import java.util.HashSet;

public class Permissions {
    private final Set<String> granted = new HashSet<>();

    public void grant(String permission) {
        granted.add(permission);
    }

    public boolean allows(String permission) {
        return granted.contains(permission) || granted.contains("*");
    }
}
